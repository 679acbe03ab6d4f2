"""Seeded paired-run suites shared by the module tests and the acceptance run.

Results are cached per process so the 10- and 20-seed sweeps run once.
"""

from functools import lru_cache

import numpy as np

from fulllik import experiments as ex
from fulllik import recalibrate as rc

SEEDS_10 = tuple(range(10))
SEEDS_20 = tuple(range(20))


@lru_cache(maxsize=None)
def outliers(seed):
    """All four detectors on the default contaminated Gaussian."""
    return ex.outlier_suite(seed)


@lru_cache(maxsize=None)
def recalibration(seed):
    res, fitted, v, t = ex.recalibration(seed, kinds=("global_scaling", "linear_scaling",
                                                      "linear_feature_scaling"))
    rows = {r["method"]: r for r in res["table"]}
    argmax_ok = True
    for rec in fitted.values():
        p = rc.apply_recalibrator(rec, t)
        argmax_ok &= bool(np.array_equal(p.argmax(axis=1), t.outputs.argmax(axis=1)))
    return {"uncal": rows["Uncalibrated"]["ece"],
            "GS": rows["GS"]["ece"], "LS": rows["LS"]["ece"], "LFS": rows["LFS"]["ece"],
            "argmax_ok": argmax_ok, "test_accuracy": res["test_accuracy"],
            "train_accuracy": res["train_accuracy"]}


@lru_cache(maxsize=None)
def bench_reg(seed):
    r = ex.bench_reg(seed)
    dyn = {m["method"]: m for m in r["dynamic"]}
    return {"grid_min": min(r["lasso"]), "D-LASSO": dyn["D-LASSO"]["error"],
            "M-LASSO": dyn["M-LASSO"]["error"], "D-Ridge": dyn["D-Ridge"]["error"],
            "ridge_min": min(r["ridge"]), "ols": r["ols"]}
