"""Scale-as-score outlier detection.

PCA+S and AE+S fit an autoencoder under a normal likelihood whose scale is
a data parameter (one sigma per row by default); the fitted sigma is the
outlier score.  The baselines fit the same autoencoder with sigma frozen at
1 (plain squared error) and score rows by mean squared reconstruction error.
Scoring is transductive: the scored rows are the fitted rows.
"""

from dataclasses import dataclass, field

import numpy as np

from . import metrics
from . import transforms as tf
from .conditioning import provider_init
from .families import LikelihoodSpec
from .fitting import FitConfig, fit
from .models import autoencoder, model_forward

KINDS = ("pca_s", "ae_s", "pca_baseline", "ae_baseline")


def default_fit_config(seed=0):
    return FitConfig(lr=0.01, steps=1500, clip_norm=None, seed=seed)


@dataclass
class DetectorSpec:
    kind: str
    code: int
    cfg: FitConfig = field(default_factory=default_fit_config)
    depth: int = 1              # hidden layers per side for the deep kinds
    hidden: int | None = None
    dropout: float | None = None  # None: 0 for linear, 0.2 for deep
    per_feature: bool = False   # one sigma per row and feature
    warm_start: bool = True     # SVD initialization of the linear kinds

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown detector kind {self.kind!r}; expected one of {KINDS}")
        if self.code < 1:
            raise ValueError("code dimension must be >= 1")

    @property
    def linear(self):
        return self.kind.startswith("pca")

    @property
    def scaled(self):
        return self.kind.endswith("_s")

    def to_dict(self):
        return {"kind": self.kind, "code": self.code, "cfg": self.cfg.to_dict(), "depth": self.depth,
                "hidden": self.hidden, "dropout": self.dropout, "per_feature": self.per_feature,
                "warm_start": self.warm_start}


@dataclass
class OutlierScores:
    scores: np.ndarray
    meta: dict = field(default_factory=dict)
    row_error: np.ndarray | None = None   # per-row mean squared reconstruction error

    def __len__(self):
        return len(self.scores)


def svd_warm_start(model, x):
    """Set a linear autoencoder to the rank-``code`` PCA projection of ``x``."""
    k = model.code
    mu = x.mean(axis=0)
    _, _, vt = np.linalg.svd(x - mu, full_matrices=False)
    v = vt[:k].T
    w = np.concatenate([v.ravel(), -mu @ v, v.T.ravel(), mu])
    model.set_weights(w)


def build_model(spec, d):
    if spec.code >= d:
        raise ValueError(f"code dimension {spec.code} must be smaller than the feature dimension {d}")
    if spec.linear:
        dropout = 0.0 if spec.dropout is None else spec.dropout
        return autoencoder(d, spec.code, depth=0, dropout=dropout, seed=spec.cfg.seed)
    dropout = 0.2 if spec.dropout is None else spec.dropout
    return autoencoder(d, spec.code, depth=spec.depth, hidden=spec.hidden, dropout=dropout,
                       seed=spec.cfg.seed)


def detect(spec, data):
    """Fit ``spec`` on ``data.features`` and return one score per row."""
    x = np.asarray(data.features, dtype=float)
    model = build_model(spec, x.shape[1])
    if spec.linear and spec.warm_start:
        svd_warm_start(model, x)
    if spec.scaled:
        lik = LikelihoodSpec("normal", per_output=spec.per_feature)
        dim = lik.provider_dim(model.n_out)
        provider = provider_init("data", dim, tf.SIGMA, 1.0, n=data.n)
    else:
        lik = LikelihoodSpec("normal", fixed={"sigma": 1.0})
        provider = None
    report = fit(model, lik, provider, data, spec.cfg)
    recon, _ = model_forward(model, x)
    err = np.mean((recon - x) ** 2, axis=1)
    if spec.scaled:
        sigma = provider.constrained()
        scores = sigma.mean(axis=1)
    else:
        scores = err
    meta = {"detector": spec.to_dict(), "final_loss": report.trajectory[-1],
            "reconstruction_mse": float(err.mean())}
    return OutlierScores(np.asarray(scores, dtype=float), meta, err)


def evaluate_auc(scores, labels):
    s = scores.scores if isinstance(scores, OutlierScores) else scores
    if len(s) != len(labels):
        raise ValueError("labels must have one entry per score")
    return metrics.roc_auc(s, labels)
