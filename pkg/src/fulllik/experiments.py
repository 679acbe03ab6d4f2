"""Seeded desk-scale experiments shared by the CLI, scripts and acceptance tests.

Each function is a pure function of its arguments (including ``seed``) and
returns plain dicts / arrays so results can be serialized directly.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import data
from . import outliers as od
from . import priors
from . import recalibrate as rc
from . import transforms as tf
from .conditioning import provider_init
from .families import LikelihoodSpec
from .fitting import FitConfig, fit
from .models import linear, mlp, model_forward, penultimate

# ------------------------------------------------------- adaptive regularization

LAMBDA_GRID = np.logspace(-2, 3, 25)


def lasso_path(x, y, lams):
    """LASSO solutions of ||y - Xw||^2 + lam ||w||_1 (no intercept)."""
    from sklearn.linear_model import Lasso
    n = len(y)
    out = []
    for lam in lams:
        m = Lasso(alpha=lam / (2.0 * n), fit_intercept=False, max_iter=100000, tol=1e-10)
        out.append(m.fit(x, y).coef_.copy())
    return np.array(out)


def ridge_path(x, y, lams):
    """Ridge solutions of ||y - Xw||^2 + lam ||w||^2 (no intercept)."""
    g = x.T @ x
    b = x.T @ y
    eye = np.eye(x.shape[1])
    return np.array([np.linalg.solve(g + lam * eye, b) for lam in lams])


def ols(x, y):
    return np.linalg.lstsq(x, y, rcond=None)[0]


def adaptive_fit(ds, family, granularity, cfg):
    """Linear regression under a normal likelihood with a global learned sigma
    and an adaptive prior; returns ``(weights, report, prior)``."""
    m = linear(ds.d, 1, seed=cfg.seed)
    provider = provider_init("global", 1, tf.SIGMA, 1.0)
    prior = priors.make_prior(family, granularity, m, init_scale=1.0)
    rep = fit(m, LikelihoodSpec("normal"), provider, ds, cfg, prior=prior)
    return m.unpack()[0][0][:, 0].copy(), rep, prior


def bench_reg_fit_config(seed=0):
    return FitConfig(lr=0.01, steps=3000, clip_norm=None, seed=seed)


def bench_reg(seed, n=200, d=100, sparsity=0.1, noise=1.0, lams=LAMBDA_GRID, cfg=None,
              threads=1):
    """Grid Ridge/LASSO recovery error versus D-Ridge, D-LASSO and M-LASSO.

    Errors are ||w_hat - w*||^2.  The grid also reports the lam = 0 endpoint
    (ordinary least squares).
    """
    cfg = cfg or bench_reg_fit_config(seed)
    ds, w = data.gen_sparse_linear(n, d, sparsity, noise, seed)
    x, y = ds.features, ds.targets
    err = lambda v: float(np.sum((v - w) ** 2))
    lams = np.asarray(lams, dtype=float)
    grid_lasso = [err(v) for v in lasso_path(x, y, lams)]
    grid_ridge = [err(v) for v in ridge_path(x, y, lams)]
    methods = (("D-Ridge", "normal", "dynamic"), ("D-LASSO", "laplace", "dynamic"),
               ("M-LASSO", "laplace", "multi"))

    def run(spec):
        name, family, gran = spec
        w_hat, rep, prior = adaptive_fit(ds, family, gran, cfg)
        lam = priors.effective_lambda(prior)
        row = {"method": name, "error": err(w_hat), "sigma": rep.extras["likelihood_params"][0]}
        if np.ndim(lam) == 0:
            # the classical penalty strength implied by the fitted scales: 2 sigma^2 / b (L1), sigma^2 / s^2 (L2)
            s2 = row["sigma"] ** 2
            row["lambda_eff"] = float(lam)
            row["lambda_implied"] = float(2 * s2 * lam if family == "laplace" else s2 * lam)
        return row

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            dynamic = list(pool.map(run, methods))
    else:
        dynamic = [run(m) for m in methods]
    return {"seed": seed, "n": n, "d": d, "sparsity": sparsity, "noise": noise,
            "lambda": lams.tolist(), "lasso": grid_lasso, "ridge": grid_ridge,
            "ols": err(ols(x, y)), "dynamic": dynamic}


def bench_reg_sparsity(seed, sparsities=(0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0), **kw):
    """Right panel: best grid LASSO / Ridge versus the adaptive methods by true sparsity."""
    rows = []
    for s in sparsities:
        r = bench_reg(seed, sparsity=s, **kw)
        row = {"sparsity": s, "grid_lasso_min": min(r["lasso"]), "grid_ridge_min": min(r["ridge"])}
        row.update({m["method"]: m["error"] for m in r["dynamic"]})
        rows.append(row)
    return rows


# ------------------------------------------------------------ robust modeling

def outlier_classification(seed, n=400, fraction=0.1, n_test=2000, cfg=None):
    """Logistic regression with a predicted temperature versus tau fixed at 1.

    Trained on contaminated data, tested on a clean draw of the inlier task.
    """
    cfg = cfg or FitConfig(lr=0.01, steps=2000, seed=seed)
    train = data.gen_outlier_classification(n, fraction, seed)
    test = data.gen_outlier_classification(n_test, 0.0, seed + 1000)
    out = {}
    for name in ("fixed_tau", "predicted_tau"):
        m = linear(2, 2, seed=seed)
        if name == "fixed_tau":
            lik, provider = LikelihoodSpec("softmax", fixed={"tau": 1.0}), None
        else:
            lik = LikelihoodSpec("softmax")
            provider = provider_init("predicted", 1, tf.TAU, 1.0, n_features=2, seed=seed)
        rep = fit(m, lik, provider, train, cfg, test=test)
        out[name] = rep.test["accuracy"]
    return out


def robust_regression(seed, n=200, fraction=0.2, cfg=None):
    """Slope error of predicted-sigma linear regression versus least squares."""
    cfg = cfg or FitConfig(lr=0.01, steps=3000, seed=seed)
    ds = data.gen_outlier_regression(n, fraction, seed)
    slope = ds.meta["slope"]
    x1 = np.c_[ds.features, np.ones(ds.n)]
    ols_slope = float(ols(x1, ds.targets)[0])
    m = linear(1, 1, seed=seed)
    nf = 2 if cfg.head_input == "xy" else 1
    provider = provider_init("predicted", 1, tf.SIGMA, 1.0, n_features=nf, seed=seed)
    fit(m, LikelihoodSpec("normal"), provider, ds, cfg)
    fitted = float(m.unpack()[0][0][0, 0])
    return {"true_slope": slope, "ols_slope": ols_slope, "predicted_sigma_slope": fitted,
            "ols_error": abs(ols_slope - slope), "predicted_sigma_error": abs(fitted - slope)}


def heteroskedastic(seed, n=500, n_test=2000, cfg=None):
    """Test CAL of predicted-sigma versus sigma frozen at 1."""
    cfg = cfg or FitConfig(lr=0.01, steps=3000, seed=seed)
    train = data.gen_heteroskedastic(n, seed)
    test = data.gen_heteroskedastic(n_test, seed + 1000)
    out = {}
    for name in ("fixed_sigma", "predicted_sigma"):
        m = linear(1, 1, seed=seed)
        if name == "fixed_sigma":
            lik, provider = LikelihoodSpec("normal", fixed={"sigma": 1.0}), None
        else:
            lik = LikelihoodSpec("normal")
            provider = provider_init("predicted", 1, tf.SIGMA, 1.0, n_features=1, seed=seed)
        rep = fit(m, lik, provider, train, cfg, test=test)
        out[name] = {"cal": rep.test["cal"], "nll": rep.test["nll"], "mse": rep.test["mse"]}
    return out


# --------------------------------------------------------------- outliers

def outlier_suite(seed, n=500, d=10, fraction=0.05, radius=6.0, code=2, kinds=od.KINDS,
                  cfg=None, rank=None):
    ds = data.standardize(data.gen_contaminated_gaussian(n, d, fraction, radius, seed, rank=rank))
    cfg = cfg or od.default_fit_config(seed)
    out = {}
    for kind in kinds:
        sc = od.detect(od.DetectorSpec(kind, code, cfg), ds)
        inl = ds.labels == 0
        out[kind] = {"auc": od.evaluate_auc(sc, ds.labels),
                     "inlier_reconstruction": float(sc.row_error[inl].mean())}
    return out


# ----------------------------------------------------------- recalibration

def base_classifier_fit_config(seed=0):
    return FitConfig(lr=0.01, steps=1000, seed=seed)


def recalibration(seed, n_train=300, n_val=300, n_test=2000, width=100, d=10, classes=3,
                  spread=1.5, base_cfg=None, cfg=None, kinds=None):
    """Overfit a one-hidden-layer classifier, then compare recalibrators on held-out data."""
    base_cfg = base_cfg or base_classifier_fit_config(seed)
    ds = data.gen_blobs(n_train + n_val + n_test, d, classes, spread, seed)
    train = ds.rows(np.arange(n_train)).reindexed()
    val = ds.rows(np.arange(n_train, n_train + n_val))
    test = ds.rows(np.arange(n_train + n_val, ds.n))
    model = mlp(d, (width,), classes, seed=seed)
    rep = fit(model, LikelihoodSpec("softmax", fixed={"tau": 1.0}), None, train, base_cfg)

    def inputs(split, tag):
        z, cache = model_forward(model, split.features)
        return rc.CalibrationInput(z, split.targets, features=penultimate(cache), split=tag)

    v, t = inputs(val, "validation"), inputs(test, "test")
    rows, fitted = rc.compare_methods(v, t, kinds=kinds, cfg=cfg or rc.default_fit_config(seed))
    return {"train_accuracy": rep.train["accuracy"],
            "test_accuracy": float(np.mean(t.outputs.argmax(axis=1) == t.targets)),
            "table": rows}, fitted, v, t
