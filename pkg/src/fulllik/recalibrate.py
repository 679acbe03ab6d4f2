"""Post-hoc recalibration by fitting likelihood-parameter heads on a validation split.

Classifiers: the base logits ``z`` are rescaled by a temperature produced by
a head (GS: one global tau; LS: linear in the logits; LFS: linear in the
penultimate features; DS: an MLP on the features) or reweighted per class
(VS).  Platt and isotonic baselines work one-vs-rest and renormalize.

Regressors: the base prediction is the mean of a normal whose sigma comes
from a head (GS: global; LS: linear in the mean; DS: 2-hidden-layer MLP on
the features).  The isotonic baseline remaps predictive CDF values.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, ndtr

from . import likelihoods as lk
from . import metrics
from . import transforms as tf
from .conditioning import ParamRequest, provider_init
from .data import Dataset
from .families import LikelihoodSpec
from .fitting import FitConfig, fit
from .models import identity
from .optim import make_optimizer

CLASSIFIER_KINDS = ("global_scaling", "vector_scaling", "linear_scaling",
                    "linear_feature_scaling", "deep_scaling", "platt", "isotonic")
REGRESSOR_KINDS = ("global_scaling", "linear_scaling", "deep_scaling", "isotonic")
SHORT = {"global_scaling": "GS", "vector_scaling": "VS", "linear_scaling": "LS",
         "linear_feature_scaling": "LFS", "deep_scaling": "DS", "platt": "Platt",
         "isotonic": "Isotonic"}
DEEP_HIDDEN = (32, 32)
# Post-hoc heads must undo large overconfidence; the training-time tau
# offset of 0.2 floors tau at 0.224, which caps the correctable factor at ~4.5.
HEAD_SHIFT = 0.01


def default_fit_config(seed=0):
    # weight decay keeps feature heads from memorizing a small validation split
    return FitConfig(lr=0.001, steps=3000, clip_norm=1.0, likelihood_weight_decay=1e-2, seed=seed)


@dataclass
class CalibrationInput:
    """Base-model outputs on one split.

    ``outputs`` are logits (classification) or predicted means (regression,
    one column).  ``sigma`` is the base model's predictive std for
    regression (1 when absent).
    """

    outputs: np.ndarray
    targets: np.ndarray
    features: np.ndarray | None = None
    sigma: np.ndarray | None = None
    task: str = "classification"
    split: str = "validation"

    def __post_init__(self):
        self.outputs = np.asarray(self.outputs, dtype=float)
        if self.outputs.ndim == 1:
            self.outputs = self.outputs[:, None]
        if self.task not in ("classification", "regression"):
            raise ValueError(f"unknown task {self.task!r}")
        t = np.asarray(self.targets)
        self.targets = t.astype(np.int64) if self.task == "classification" else t.astype(float).ravel()
        n = len(self.outputs)
        if len(self.targets) != n:
            raise ValueError("targets and outputs disagree on row count")
        if self.features is not None:
            self.features = np.asarray(self.features, dtype=float)
            if len(self.features) != n:
                raise ValueError("features and outputs disagree on row count")
        if self.sigma is not None:
            self.sigma = np.broadcast_to(np.asarray(self.sigma, dtype=float).ravel(), (n,)).copy()

    @property
    def n(self):
        return len(self.outputs)

    def base_sigma(self):
        return np.ones(self.n) if self.sigma is None else self.sigma


@dataclass
class Recalibrator:
    kind: str
    task: str
    params: dict = field(default_factory=dict)
    n_outputs: int = 0
    n_features: int | None = None
    state: object = None      # provider / fitted arrays used by apply

    def summary(self):
        out = {"kind": self.kind, "task": self.task}
        out.update({k: v for k, v in self.params.items() if np.ndim(v) == 0})
        return out


# ------------------------------------------------------------------ isotonic

def pav(y, w=None):
    """Weighted least-squares nondecreasing fit of ``y`` (pool adjacent violators)."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    vals, wts, sizes = [], [], []
    for yi, wi in zip(y, w):
        vals.append(yi)
        wts.append(wi)
        sizes.append(1)
        while len(vals) > 1 and vals[-2] > vals[-1]:
            wsum = wts[-2] + wts[-1]
            v = (vals[-2] * wts[-2] + vals[-1] * wts[-1]) / wsum
            s = sizes[-2] + sizes[-1]
            del vals[-1], wts[-1], sizes[-1]
            vals[-1], wts[-1], sizes[-1] = v, wsum, s
    return np.repeat(vals, sizes)


@dataclass
class IsotonicMap:
    """Nondecreasing step function: value of the last knot at or below x."""

    knots: np.ndarray
    values: np.ndarray

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        i = np.searchsorted(self.knots, x, side="right") - 1
        return np.where(i < 0, self.values[0], self.values[np.maximum(i, 0)])


def fit_isotonic(scores, targets):
    s = np.asarray(scores, dtype=float)
    order = np.argsort(s, kind="mergesort")
    fitted = pav(np.asarray(targets, dtype=float)[order])
    return IsotonicMap(s[order], fitted)


# ---------------------------------------------------------------- helpers

def _check_labels(inp):
    if inp.task == "classification" and len(np.unique(inp.targets)) < 2:
        raise ValueError("validation labels contain a single class")


def _as_dataset(inp, with_targets=True):
    kind = "class" if inp.task == "classification" else "real"
    return Dataset(inp.outputs, targets=inp.targets if with_targets else None, target_kind=kind,
                   aux=inp.features)


def _head(kind, inp, seed, shift=HEAD_SHIFT):
    """Provider and head-input mode for the scaling kinds."""
    transform = tf.shifted_softplus(shift)
    if kind == "global_scaling":
        return provider_init("global", 1, transform, 1.0), "x"
    if kind == "linear_scaling":
        return provider_init("predicted", 1, transform, 1.0, n_features=inp.outputs.shape[1],
                             seed=seed), "x"
    if inp.features is None:
        raise ValueError(f"{kind} needs penultimate features")
    hidden = DEEP_HIDDEN if kind == "deep_scaling" else ()
    return provider_init("predicted", 1, transform, 1.0, n_features=inp.features.shape[1],
                         hidden=hidden, seed=seed), "aux"


def _head_params(rec, inp):
    provider, mode = rec.state
    if provider.kind == "global":
        return np.tile(provider.constrained(), (inp.n, 1))
    feats = inp.outputs if mode == "x" else inp.features
    return provider.get(ParamRequest(features=feats, training=False))


def _fit_vector(inp, cfg):
    """Per-class multiplicative weights on the logits, initialized at 1."""
    z, t = inp.outputs, inp.targets
    v = np.ones(z.shape[1])
    opt = make_optimizer(cfg.optimizer, cfg.lr, cfg.beta1, cfg.beta2)
    for _ in range(cfg.steps):
        d_logits, _ = lk.softmax_nll_grads(z * v, 1.0, t)
        opt.step(v, (d_logits * z).mean(axis=0))
    return v


def _platt_score(z):
    """One-vs-rest score per class: log-odds of its softmax probability.

    With a=1, b=0 the sigmoid returns the base probability, so calibrated
    inputs are a fixed point.
    """
    p = np.clip(lk.softmax_probs(z), 1e-15, 1 - 1e-15)
    return np.log(p) - np.log1p(-p)


def _fit_platt(score, y):
    """Two-parameter sigmoid fit by maximum likelihood."""
    def f(p):
        u = p[0] * score + p[1]
        nll = np.mean(np.logaddexp(0.0, u) - y * u)
        q = expit(u) - y
        return nll, np.array([np.mean(q * score), np.mean(q)])
    res = minimize(f, np.array([1.0, 0.0]), jac=True, method="L-BFGS-B")
    return res.x


def _normalize(p):
    s = p.sum(axis=1, keepdims=True)
    k = p.shape[1]
    return np.where(s > 0, p / np.where(s > 0, s, 1.0), 1.0 / k)


# ------------------------------------------------------------------ public

def fit_recalibrator(kind, val, cfg=None, shift=HEAD_SHIFT):
    """Fit a recalibrator of ``kind`` on the validation split ``val``.

    ``shift`` is the softplus offset of the tau / sigma heads.
    """
    cfg = cfg or default_fit_config()
    kinds = CLASSIFIER_KINDS if val.task == "classification" else REGRESSOR_KINDS
    if kind not in kinds:
        raise ValueError(f"unknown {val.task} recalibrator {kind!r}; expected one of {kinds}")
    _check_labels(val)
    rec = Recalibrator(kind, val.task, n_outputs=val.outputs.shape[1],
                       n_features=None if val.features is None else val.features.shape[1])

    if val.task == "classification":
        k = val.outputs.shape[1]
        if kind == "vector_scaling":
            rec.state = _fit_vector(val, cfg)
            rec.params["v"] = rec.state.tolist()
        elif kind == "platt":
            onehot = np.eye(k)[val.targets]
            score = _platt_score(val.outputs)
            rec.state = np.array([_fit_platt(score[:, j], onehot[:, j]) for j in range(k)])
            rec.params["ab"] = rec.state.tolist()
        elif kind == "isotonic":
            p = lk.softmax_probs(val.outputs)
            onehot = np.eye(k)[val.targets]
            rec.state = [fit_isotonic(p[:, j], onehot[:, j]) for j in range(k)]
        else:
            provider, mode = _head(kind, val, cfg.seed, shift)
            lik = LikelihoodSpec("softmax")
            fit(identity(k), lik, provider, _as_dataset(val), _with_head(cfg, mode))
            rec.state = (provider, mode)
            if kind == "global_scaling":
                rec.params["tau"] = float(provider.constrained()[0])
        return rec

    if kind == "isotonic":
        f = ndtr((val.targets - val.outputs[:, 0]) / val.base_sigma())
        emp = (np.argsort(np.argsort(f, kind="mergesort"), kind="mergesort") + 1) / val.n
        rec.state = fit_isotonic(f, emp)
        return rec
    provider, mode = _head(kind, val, cfg.seed, shift)
    fit(identity(1), LikelihoodSpec("normal"), provider, _as_dataset(val), _with_head(cfg, mode))
    rec.state = (provider, mode)
    if kind == "global_scaling":
        rec.params["sigma"] = float(provider.constrained()[0])
    return rec


def _with_head(cfg, mode):
    d = cfg.to_dict()
    d["head_input"] = mode
    return FitConfig(**d)


def apply_recalibrator(rec, inp):
    """Calibrated class probabilities, or ``(mean, sigma)`` / CDF values for regression.

    Regression returns a dict with ``mean`` and ``sigma`` for the scaling
    kinds and ``cdf`` (recalibrated CDF values at the targets) for isotonic.
    """
    if inp.task != rec.task:
        raise ValueError("task mismatch")
    if inp.outputs.shape[1] != rec.n_outputs:
        raise ValueError(f"expected {rec.n_outputs} outputs, got {inp.outputs.shape[1]}")
    if rec.n_features is not None and rec.kind in ("linear_feature_scaling", "deep_scaling"):
        if inp.features is None or inp.features.shape[1] != rec.n_features:
            raise ValueError("feature shape does not match the fitted recalibrator")
    z = inp.outputs
    if rec.task == "classification":
        if rec.kind == "vector_scaling":
            return lk.softmax_probs(z * rec.state)
        if rec.kind == "platt":
            a, b = rec.state[:, 0], rec.state[:, 1]
            return _normalize(expit(_platt_score(z) * a + b))
        if rec.kind == "isotonic":
            p = lk.softmax_probs(z)
            return _normalize(np.column_stack([m(p[:, j]) for j, m in enumerate(rec.state)]))
        tau = _head_params(rec, inp)[:, 0]
        return lk.softmax_probs(z, tau)
    if rec.kind == "isotonic":
        f = ndtr((inp.targets - z[:, 0]) / inp.base_sigma())
        return {"cdf": rec.state(f)}
    return {"mean": z[:, 0], "sigma": _head_params(rec, inp)[:, 0]}


def score(task, out, inp, bins=15, levels=10):
    """ECE (classification) or CAL (regression) of calibrated outputs."""
    if task == "classification":
        return metrics.ece(out, inp.targets, bins)
    if "cdf" in out:
        return metrics.cal_from_cdf(out["cdf"], levels)
    return metrics.cal_regression(out["mean"], out["sigma"], inp.targets, levels)


def uncalibrated(inp):
    if inp.task == "classification":
        return lk.softmax_probs(inp.outputs)
    return {"mean": inp.outputs[:, 0], "sigma": inp.base_sigma()}


def validation_nll(rec, inp):
    """Mean NLL of calibrated outputs (scaling kinds)."""
    out = apply_recalibrator(rec, inp)
    if inp.task == "classification":
        p = np.clip(out[np.arange(inp.n), inp.targets], 1e-300, None)
        return float(-np.mean(np.log(p)))
    return float(np.mean(lk.normal_nll(inp.targets - out["mean"], out["sigma"])))


def compare_methods(val, test, kinds=None, cfg=None, bins=15, levels=10, shift=HEAD_SHIFT):
    """Table of test ECE/CAL per method; failed fits are recorded, not raised."""
    if kinds is None:
        if val.task == "classification":
            kinds = ("platt", "isotonic", "global_scaling", "vector_scaling", "linear_scaling")
            if val.features is not None:
                kinds += ("linear_feature_scaling",)
        else:
            kinds = ("isotonic", "global_scaling", "linear_scaling")
            if val.features is not None:
                kinds += ("deep_scaling",)
    metric = "ece" if val.task == "classification" else "cal"
    rows = [{"method": "Uncalibrated", metric: score(val.task, uncalibrated(test), test, bins, levels)}]
    fitted = {}
    for kind in kinds:
        row = {"method": SHORT[kind]}
        try:
            rec = fit_recalibrator(kind, val, cfg, shift)
            row[metric] = score(val.task, apply_recalibrator(rec, test), test, bins, levels)
            row.update({k: v for k, v in rec.summary().items() if k in ("tau", "sigma")})
            fitted[kind] = rec
        except (ValueError, FloatingPointError) as exc:
            row[metric] = None
            row["error"] = str(exc)
        rows.append(row)
    return rows, fitted
