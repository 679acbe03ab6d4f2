"""Bijections between unconstrained reals and constrained parameter domains."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from .errors import DomainError

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class TransformSpec:
    """One of ``shifted_softplus``, ``affine_sigmoid``, ``exp`` or ``identity``.

    ``s`` is the softplus offset, ``lo``/``hi`` the sigmoid interval and
    ``floor`` an optional hard lower clamp applied after the transform.
    """

    kind: str
    s: float = 0.0
    lo: float = 0.0
    hi: float = 1.0
    floor: float | None = None

    def __post_init__(self):
        if self.kind not in ("shifted_softplus", "affine_sigmoid", "exp", "identity"):
            raise ValueError(f"unknown transform {self.kind!r}")
        if self.s < 0:
            raise ValueError("softplus offset must be >= 0")
        if self.kind == "affine_sigmoid" and not self.lo < self.hi:
            raise ValueError("affine_sigmoid needs lo < hi")

    @property
    def lower(self):
        """Infimum of the codomain (not attained)."""
        if self.kind == "shifted_softplus":
            lo = self.s / (LOG2 + self.s)
        elif self.kind == "affine_sigmoid":
            lo = self.lo
        elif self.kind == "exp":
            lo = 0.0
        else:
            lo = -math.inf
        return lo if self.floor is None else max(lo, self.floor)

    @property
    def upper(self):
        return self.hi if self.kind == "affine_sigmoid" else math.inf

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "shifted_softplus":
            y = (np.logaddexp(0.0, x) + self.s) / (LOG2 + self.s)
        elif self.kind == "affine_sigmoid":
            y = self.lo + (self.hi - self.lo) * expit(x)
        elif self.kind == "exp":
            y = np.exp(x)
        else:
            y = x.copy()
        if self.floor is not None:
            y = np.maximum(y, self.floor)
        return y

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "shifted_softplus":
            g = expit(x) / (LOG2 + self.s)
        elif self.kind == "affine_sigmoid":
            g = (self.hi - self.lo) * expit(x) * expit(-x)
        elif self.kind == "exp":
            g = np.exp(x)
        else:
            g = np.ones_like(x)
        if self.floor is not None:
            g = np.where(self.forward_raw(x) < self.floor, 0.0, g)
        return g

    def forward_raw(self, x):
        if self.floor is None:
            return self.forward(x)
        return TransformSpec(self.kind, self.s, self.lo, self.hi).forward(x)

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        if (not np.all(np.isfinite(y)) or np.any(y <= self.lower)
                or np.any(y >= self.upper)):
            raise DomainError(f"value outside the codomain of {self.kind}")
        if self.kind == "shifted_softplus":
            v = y * (LOG2 + self.s) - self.s
            # log(expm1(v)) without overflow for large v
            return v + np.log(-np.expm1(-v))
        if self.kind == "affine_sigmoid":
            return logit((y - self.lo) / (self.hi - self.lo))
        if self.kind == "exp":
            return np.log(y)
        return y.copy()


def shifted_softplus(s=0.0, floor=None):
    return TransformSpec("shifted_softplus", s=s, floor=floor)


def affine_sigmoid(lo, hi):
    return TransformSpec("affine_sigmoid", lo=lo, hi=hi)


EXP = TransformSpec("exp")
IDENTITY = TransformSpec("identity")


def forward(t, x):
    return t.forward(x)


def inverse(t, y):
    return t.inverse(y)


def forward_grad(t, x):
    return t.grad(x)


# Defaults per parameter slot.
SIGMA = shifted_softplus(0.01)
TAU = shifted_softplus(0.2)
ALPHA = affine_sigmoid(0.0, 3.0)
ROBUST_SIGMA = shifted_softplus(0.01, floor=1e-8)
LAPLACE_B = shifted_softplus(0.01)
PRIOR_SCALE = EXP
