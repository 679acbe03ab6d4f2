"""Grid Ridge/LASSO versus D-Ridge, D-LASSO and M-LASSO on sparse linear data (n=200, d=100, 10% support)."""

import numpy as np

from _common import finish, parser
from fulllik import experiments as ex

args = parser(__doc__).parse_args()
rows = []
for seed in range(args.seeds):
    r = ex.bench_reg(seed)
    dyn = {m["method"]: m["error"] for m in r["dynamic"]}
    rows.append({"seed": seed, "grid_lasso_min": min(r["lasso"]), "grid_ridge_min": min(r["ridge"]),
                 "ols": r["ols"], **dyn})
    print(seed, {k: round(v, 4) for k, v in rows[-1].items() if k != "seed"})
ratio = [r["D-LASSO"] / r["grid_lasso_min"] for r in rows]
finish(args, rows, {
    "D-LASSO within 1.5x grid min": f"{sum(x <= 1.5 for x in ratio)}/{len(rows)}",
    "D-LASSO / grid min (median)": float(np.median(ratio)),
    "M-LASSO <= grid min": f"{sum(r['M-LASSO'] <= r['grid_lasso_min'] for r in rows)}/{len(rows)}",
})
