"""Binding of a distribution family to fixed and learnable parameter slots."""

from dataclasses import dataclass, field

import numpy as np

from . import likelihoods as lk
from . import transforms as tf

SLOTS = {
    "normal": ("sigma",),
    "laplace": ("b",),
    "softmax": ("tau",),
    "robust": ("alpha", "sigma"),
}

DEFAULT_TRANSFORMS = {
    ("normal", "sigma"): tf.SIGMA,
    ("laplace", "b"): tf.LAPLACE_B,
    ("softmax", "tau"): tf.TAU,
    ("robust", "alpha"): tf.ALPHA,
    ("robust", "sigma"): tf.ROBUST_SIGMA,
}

DEFAULT_INIT = {"sigma": 1.0, "b": 1.0, "tau": 1.0, "alpha": 1.0}


@dataclass
class LikelihoodSpec:
    """A family plus which of its slots are frozen.

    Free slots are supplied by a provider whose columns are laid out
    slot-major: with ``per_output`` each slot takes one column per output
    coordinate, otherwise one column shared by all outputs.
    """

    family: str
    fixed: dict = field(default_factory=dict)
    per_output: bool = False

    def __post_init__(self):
        if self.family not in SLOTS:
            raise ValueError(f"unknown likelihood family {self.family!r}")
        unknown = set(self.fixed) - set(SLOTS[self.family])
        if unknown:
            raise ValueError(f"{self.family} has no slots {sorted(unknown)}")

    @property
    def slots(self):
        return SLOTS[self.family]

    @property
    def free_slots(self):
        return tuple(s for s in self.slots if s not in self.fixed)

    def width(self, n_out):
        return n_out if self.per_output and self.family != "softmax" else 1

    def provider_dim(self, n_out):
        return len(self.free_slots) * self.width(n_out)

    def transforms(self, n_out):
        return [DEFAULT_TRANSFORMS[(self.family, s)]
                for s in self.free_slots for _ in range(self.width(n_out))]

    def init_values(self, n_out, init=None):
        init = {**DEFAULT_INIT, **(init or {})}
        return np.array([init[s] for s in self.free_slots for _ in range(self.width(n_out))])

    def split(self, params, batch, n_out):
        """Map provider output (batch x dim) to a dict of per-slot arrays."""
        w = self.width(n_out)
        out = {}
        for k, s in enumerate(self.free_slots):
            out[s] = params[:, k * w:(k + 1) * w]
        for s, v in self.fixed.items():
            out[s] = np.full((batch, 1), float(v))
        return out

    def evaluate(self, pred, target, params=None):
        """Per-row NLL (summed over outputs) and gradients.

        Returns ``(nll_rows, d_pred, d_params)`` where ``d_params`` matches
        the provider layout (``None`` when every slot is fixed).
        """
        pred = np.asarray(pred, dtype=float)
        batch, n_out = pred.shape
        slot = self.split(params, batch, n_out)
        grads = {}
        if self.family == "softmax":
            tau = slot["tau"][:, 0]
            nll = lk.softmax_nll(pred, tau, target)
            d_pred, d_tau = lk.softmax_nll_grads(pred, tau, target)
            grads["tau"] = d_tau[:, None]
        else:
            t = np.asarray(target, dtype=float).reshape(batch, -1)
            r = pred - t
            if self.family == "normal":
                s = slot["sigma"]
                e = lk.normal_nll(r, s)
                d_pred, d_var = lk.normal_nll_grads(r, s)
                grads["sigma"] = d_var * 2.0 * s
            elif self.family == "laplace":
                b = slot["b"]
                e = lk.laplace_nll(r, b)
                d_pred, grads["b"] = lk.laplace_nll_grads(r, b)
            else:
                a, s = slot["alpha"], slot["sigma"]
                e = lk.robust_nll(r, a, s)
                d_pred, grads["alpha"], grads["sigma"] = lk.robust_nll_grads(r, a, s)
            nll = e.sum(axis=1)
        if not self.free_slots:
            return nll, d_pred, None
        w = self.width(n_out)
        cols = []
        for s in self.free_slots:
            g = grads[s]
            cols.append(g.sum(axis=1, keepdims=True) if w == 1 else g)
        return nll, d_pred, np.concatenate(cols, axis=1)

    def predictive(self, pred, params):
        """Constrained slot values broadcast to the prediction shape."""
        pred = np.asarray(pred, dtype=float)
        slot = self.split(params, *pred.shape)
        if self.family == "softmax":
            return slot
        return {k: np.broadcast_to(v, pred.shape) for k, v in slot.items()}

    def to_dict(self):
        return {"family": self.family, "fixed": dict(self.fixed), "per_output": self.per_output}
