"""Adaptive priors over model weights with learnable scales.

A normal prior gives adaptive ridge (D-Ridge), a Laplace prior adaptive
LASSO (D-LASSO).  ``granularity="dynamic"`` shares one scale across the
covered weights; ``"multi"`` learns one scale per weight.  Scales are stored
as logs (exp transform) and clamped below at ``SCALE_FLOOR``.
"""

import math
from dataclasses import dataclass

import numpy as np

SCALE_FLOOR = 1e-6
LOG2 = math.log(2.0)
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(eq=False)
class PriorSpec:
    family: str               # "normal" or "laplace"
    granularity: str          # "dynamic" or "multi"
    covered: np.ndarray       # flat indices into the model weight vector
    log_scale: np.ndarray     # unconstrained store
    normalized: bool = True   # include the log 2 / log sqrt(2 pi) constants

    def __post_init__(self):
        if self.family not in ("normal", "laplace"):
            raise ValueError(f"unknown prior family {self.family!r}")
        if self.granularity not in ("dynamic", "multi"):
            raise ValueError(f"unknown granularity {self.granularity!r}")
        self.covered = np.asarray(self.covered, dtype=np.int64)
        self.log_scale = np.asarray(self.log_scale, dtype=float).copy()
        want = 1 if self.granularity == "dynamic" else len(self.covered)
        if self.log_scale.shape != (want,):
            raise ValueError(f"expected {want} scale values, got {self.log_scale.shape}")

    @property
    def name(self):
        prefix = "D" if self.granularity == "dynamic" else "M"
        return f"{prefix}-{'LASSO' if self.family == 'laplace' else 'Ridge'}"

    def scales(self):
        """Constrained scales, one per covered weight."""
        s = np.maximum(np.exp(self.log_scale), SCALE_FLOOR)
        return np.broadcast_to(s, self.covered.shape) if self.granularity == "dynamic" else s

    def n_params(self):
        return self.log_scale.size


def make_prior(family, granularity, model, init_scale=1.0, covered=None, normalized=True):
    """Prior over ``model``'s multiplicative weights (biases excluded by default)."""
    if covered is None:
        covered = np.flatnonzero(model.weight_mask())
    n = 1 if granularity == "dynamic" else len(covered)
    return PriorSpec(family, granularity, covered, np.full(n, math.log(init_scale)), normalized)


def prior_nll(spec, theta, normalized=None):
    """Summed prior NLL of the covered weights of ``theta``."""
    norm = spec.normalized if normalized is None else normalized
    th = np.asarray(theta, dtype=float)[spec.covered]
    s = spec.scales()
    if spec.family == "laplace":
        terms = np.abs(th) / s + np.log(s) + (LOG2 if norm else 0.0)
    else:
        terms = th * th / (2.0 * s * s) + np.log(s) + (HALF_LOG_2PI if norm else 0.0)
    return float(np.sum(terms))


def prior_grads(spec, theta):
    """Return ``(d/d theta over the full weight vector, d/d log_scale)``."""
    theta = np.asarray(theta, dtype=float)
    th = theta[spec.covered]
    s = spec.scales()
    d_theta = np.zeros_like(theta)
    if spec.family == "laplace":
        d_theta[spec.covered] = np.sign(th) / s
        d_s = (1.0 - np.abs(th) / s) / s
    else:
        d_theta[spec.covered] = th / (s * s)
        d_s = (1.0 - th * th / (s * s)) / s
    # chain through exp; zero where the floor clamps
    raw = np.exp(spec.log_scale)
    if spec.granularity == "dynamic":
        d_log = np.array([d_s.sum()]) * raw
    else:
        d_log = d_s * raw
    d_log = np.where(raw < SCALE_FLOOR, 0.0, d_log)
    return d_theta, d_log


def effective_lambda(spec):
    """Implied regularization strength: 1/b (Laplace) or 1/sigma^2 (normal)."""
    s = spec.scales()
    lam = 1.0 / s if spec.family == "laplace" else 1.0 / (s * s)
    return float(lam[0]) if spec.granularity == "dynamic" else lam.copy()


def stationary_scale(spec, theta):
    """Closed-form optimal scale(s) for fixed weights."""
    th = np.asarray(theta, dtype=float)[spec.covered]
    if spec.family == "laplace":
        v = np.abs(th)
        return float(v.mean()) if spec.granularity == "dynamic" else v
    v = th * th
    return float(np.sqrt(v.mean())) if spec.granularity == "dynamic" else np.sqrt(v)
