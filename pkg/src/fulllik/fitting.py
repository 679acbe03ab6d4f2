"""Joint optimization of model weights and likelihood parameters.

The objective for a batch ``B`` of a training set of size ``N`` is

    mean_{i in B} NLL_i  +  prior_nll(theta) / N
    + weight_decay * |theta|^2 + likelihood_weight_decay * |phi|^2

so the prior-to-data balance is that of the summed NLL while learning rates
stay independent of the batch size.
"""

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import metrics
from .conditioning import DataProvider, ParamRequest, PredictedProvider
from .data import stream
from .errors import DivergedError
from .families import LikelihoodSpec
from .models import model_backward, model_forward, penultimate
from .optim import clip_scale, make_optimizer
from .priors import effective_lambda, prior_grads, prior_nll

SCHEMA_VERSION = "1.0"


@dataclass
class FitConfig:
    optimizer: str = "adam"
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.99
    steps: int = 3000
    batch_size: int | None = None          # None: full batch
    clip_norm: float | None = 1.0          # None: no clipping
    likelihood_lr_mult: float = 1.0
    data_optimizer: str = "rmsprop_sparse"  # or "same"
    weight_decay: float = 0.0
    likelihood_weight_decay: float = 0.0
    freeze_model: bool = False
    head_input: str = "x"                  # x | xy | hidden | aux
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be > 0")
        if self.head_input not in ("x", "xy", "hidden", "aux"):
            raise ValueError(f"unknown head input {self.head_input!r}")

    def to_dict(self):
        return asdict(self)


@dataclass
class FitReport:
    seed: int
    steps: int
    trajectory: list
    train: dict
    test: dict | None
    param_counts: dict
    space: dict
    likelihood: dict
    wall_time: float = 0.0
    extras: dict = field(default_factory=dict)

    def to_dict(self, include_timing=False):
        d = {"schema_version": SCHEMA_VERSION, "seed": self.seed, "steps": self.steps,
             "train": self.train, "test": self.test, "param_counts": self.param_counts,
             "space": self.space, "likelihood": self.likelihood, "extras": self.extras,
             "trajectory_length": len(self.trajectory)}
        if include_timing:
            d["wall_time"] = self.wall_time
        return d


@dataclass
class Gradients:
    model: np.ndarray
    provider: object = None      # GradRecord
    prior: np.ndarray | None = None

    def sq_norms(self):
        out = [float(np.sum(self.model * self.model))]
        if self.provider is not None:
            out.append(self.provider.sq_norm())
        if self.prior is not None:
            out.append(float(np.sum(self.prior * self.prior)))
        return out

    def scaled(self, c):
        return Gradients(self.model * c,
                         None if self.provider is None else self.provider.scaled(c),
                         None if self.prior is None else self.prior * c)


def targets_of(model, data):
    if model.kind == "autoencoder":
        return data.features
    if data.targets is None:
        raise ValueError("dataset has no targets")
    return data.targets


def head_features(cfg_head_input, data, rows, hidden=None):
    if cfg_head_input == "x":
        return data.features[rows]
    if cfg_head_input == "xy":
        t = np.asarray(data.targets, dtype=float)[rows].reshape(len(rows), -1)
        return np.hstack([data.features[rows], t])
    if cfg_head_input == "aux":
        if data.aux is None:
            raise ValueError("head_input='aux' needs dataset.aux")
        return data.aux[rows]
    return hidden


def _params_for(provider, likelihood, rows, feats, batch, training):
    if provider is None:
        if likelihood.free_slots:
            raise ValueError("likelihood has free slots but no provider was given")
        return None, None
    req = ParamRequest(indices=rows if isinstance(provider, DataProvider) else None,
                       features=feats, size=batch, training=training)
    return req, provider.get(req)


def objective(model, likelihood, provider, data, rows=None, prior=None, cfg=None,
              train=True, rng=None, n_total=None):
    """Loss and gradients of the joint objective on ``rows`` of ``data``.

    ``rows`` are positions within ``data`` (the training set) and double as
    data-provider indices.
    """
    cfg = cfg or FitConfig()
    rows = np.arange(data.n) if rows is None else np.asarray(rows)
    n_total = n_total or data.n
    x = data.features[rows]
    y = np.asarray(targets_of(model, data))[rows]
    pred, cache = model_forward(model, x, train=train, rng=rng)
    feats = None
    if isinstance(provider, PredictedProvider):
        feats = head_features(cfg.head_input, data, rows, penultimate(cache))
        if not provider.calibrated:
            provider.calibrate(feats)
    req, params = _params_for(provider, likelihood, rows, feats, len(rows), True)
    nll, d_pred, d_params = likelihood.evaluate(pred, y, params)
    b = len(rows)
    loss = float(nll.mean())
    d_pred = d_pred / b

    rec = None
    hidden_up = None
    if provider is not None:
        rec = provider.backward(req, d_params / b)
        if cfg.head_input == "hidden" and rec.d_features is not None:
            hidden_up = rec.d_features
        if cfg.likelihood_weight_decay:
            loss += cfg.likelihood_weight_decay * float(np.sum(provider.store ** 2))
            _add_decay(rec, provider, cfg.likelihood_weight_decay)
    g_model, _ = model_backward(model, cache, d_pred, hidden_upstream=hidden_up)

    g_prior = None
    if prior is not None:
        loss += prior_nll(prior, model.weights) / n_total
        d_theta, g_prior = prior_grads(prior, model.weights)
        g_model = g_model + d_theta / n_total
        g_prior = g_prior / n_total
    if cfg.weight_decay:
        loss += cfg.weight_decay * float(np.sum(model.weights ** 2))
        g_model = g_model + 2.0 * cfg.weight_decay * model.weights
    return loss, Gradients(g_model, rec, g_prior)


def _add_decay(rec, provider, wd):
    if rec.dense is not None:
        rec.dense = rec.dense + 2.0 * wd * provider.store.ravel()[: rec.dense.size].reshape(rec.dense.shape)
    else:
        rows = 0 if provider.tied else rec.rows
        rec.row_grads = rec.row_grads + 2.0 * wd * provider.store[rows]


def _batches(n, batch_size, rng):
    if batch_size is None or batch_size >= n:
        while True:
            yield np.arange(n)
    while True:
        perm = rng.permutation(n)
        for start in range(0, n - batch_size + 1, batch_size):
            yield np.sort(perm[start:start + batch_size])


def predict(model, likelihood, provider, data, cfg=None, transductive=False):
    """Predictions plus constrained likelihood parameters on ``data``."""
    cfg = cfg or FitConfig()
    rows = np.arange(data.n)
    pred, cache = model_forward(model, data.features)
    feats = None
    if isinstance(provider, PredictedProvider):
        feats = head_features(cfg.head_input, data, rows, penultimate(cache))
    _, params = _params_for(provider, likelihood, rows, feats, data.n, training=transductive)
    return pred, params


def evaluate(model, likelihood, provider, data, cfg=None, transductive=False):
    pred, params = predict(model, likelihood, provider, data, cfg, transductive)
    y = targets_of(model, data)
    nll, _, _ = likelihood.evaluate(pred, y, params)
    out = {"nll": float(nll.mean())}
    if likelihood.family == "softmax":
        out["accuracy"] = float(np.mean(pred.argmax(axis=1) == y))
    else:
        out["mse"] = metrics.mse(pred, np.asarray(y, dtype=float).reshape(pred.shape))
        if likelihood.family == "normal" and pred.shape[1] == 1:
            sigma = likelihood.predictive(pred, params)["sigma"]
            out["cal"] = metrics.cal_regression(pred[:, 0], sigma[:, 0], np.asarray(y, float).ravel())
    return out


def fit(model, likelihood, provider, data, cfg=None, prior=None, test=None, callback=None):
    """Run ``cfg.steps`` optimizer steps on the joint objective.

    Model weights use ``cfg.optimizer``; global/predicted likelihood
    parameters and prior scales use the same optimizer at
    ``lr * likelihood_lr_mult``; data parameters use sparse RMSProp at that
    rate unless ``data_optimizer="same"``.  The concatenated gradient is
    clipped to ``cfg.clip_norm``.
    """
    cfg = cfg or FitConfig()
    if not isinstance(likelihood, LikelihoodSpec):
        raise TypeError("likelihood must be a LikelihoodSpec")
    if provider is not None and provider.dim != likelihood.provider_dim(model.n_out):
        raise ValueError(f"provider dim {provider.dim} != likelihood slots "
                         f"{likelihood.provider_dim(model.n_out)}")
    if isinstance(provider, DataProvider) and provider.n != data.n and not provider.tied:
        raise ValueError("data provider size must equal the training-set size")

    start = time.perf_counter()
    rng_batch = stream(cfg.seed, "fit", "batches")
    rng_drop = stream(cfg.seed, "fit", "dropout")
    lik_lr = cfg.lr * cfg.likelihood_lr_mult
    opt_model = make_optimizer(cfg.optimizer, cfg.lr, cfg.beta1, cfg.beta2)
    opt_lik = None
    if provider is not None:
        kind = cfg.optimizer
        if isinstance(provider, DataProvider) and cfg.data_optimizer != "same":
            kind = cfg.data_optimizer
        opt_lik = make_optimizer(kind, lik_lr, cfg.beta1, cfg.beta2)
    opt_prior = make_optimizer(cfg.optimizer, lik_lr, cfg.beta1, cfg.beta2) if prior else None

    trajectory = []
    batches = _batches(data.n, cfg.batch_size, rng_batch)
    for step in range(cfg.steps):
        rows = next(batches)
        loss, grads = objective(model, likelihood, provider, data, rows, prior, cfg,
                                train=True, rng=rng_drop, n_total=data.n)
        if cfg.freeze_model:
            grads.model = np.zeros_like(grads.model)
        norms = grads.sq_norms()
        if not np.isfinite(loss) or not np.all(np.isfinite(norms)):
            last = trajectory[-1] if trajectory else float("nan")
            raise DivergedError(f"non-finite loss or gradient at step {step}",
                                last_step=step - 1, last_loss=last)
        trajectory.append(loss)
        grads = grads.scaled(clip_scale(norms, cfg.clip_norm))
        if not cfg.freeze_model and model.n_params:
            opt_model.step(model.weights, grads.model)
            model.bump()
        if provider is not None:
            rec = grads.provider
            if rec.dense is not None:
                opt_lik.step(provider.store.reshape(-1), rec.dense.reshape(-1))
                if isinstance(provider, PredictedProvider):
                    provider.head.bump()
            else:
                opt_lik.step(provider.store, rec.row_grads, rows=rec.rows)
        if prior is not None:
            opt_prior.step(prior.log_scale, grads.prior)
        if callback is not None:
            callback(step, loss)
    wall = time.perf_counter() - start

    train_metrics = evaluate(model, likelihood, provider, data, cfg, transductive=True)
    test_metrics = None
    if test is not None and not isinstance(provider, DataProvider):
        test_metrics = evaluate(model, likelihood, provider, test, cfg)
    counts = {"model": int(model.n_params),
              "likelihood": int(provider.n_params) if provider is not None else 0,
              "prior": int(prior.n_params()) if prior is not None else 0}
    extras = {}
    if provider is not None and not isinstance(provider, PredictedProvider):
        c = provider.constrained()
        extras["likelihood_params"] = (c.tolist() if np.ndim(c) == 1 else
                                       {"mean": c.mean(axis=0).tolist(), "min": c.min(axis=0).tolist(),
                                        "max": c.max(axis=0).tolist()})
    if prior is not None:
        lam = effective_lambda(prior)
        extras["prior"] = prior.name
        extras["lambda_eff"] = lam if np.ndim(lam) == 0 else {
            "median": float(np.median(lam)), "min": float(np.min(lam)), "max": float(np.max(lam))}
    return FitReport(seed=cfg.seed, steps=cfg.steps, trajectory=trajectory, train=train_metrics,
                     test=test_metrics, param_counts=counts, space=space_accounting(provider, data),
                     likelihood=likelihood.to_dict(), wall_time=wall, extras=extras)


def space_accounting(provider, data):
    """Storage of the likelihood parameters and its asymptotic class."""
    if provider is None:
        return {"kind": "fixed", "count": 0, "order": "O(1)"}
    order = {"global": "O(p)", "data": "O(pn)", "predicted": "O(pd)"}[provider.kind]
    return {"kind": provider.kind, "count": int(provider.n_params), "order": order,
            "p": int(provider.dim), "n": int(data.n), "bytes": int(provider.n_params * 8)}
