"""Providers of likelihood parameters: global, per-datum, or predicted.

Each provider stores unconstrained values and emits a ``batch x dim`` matrix
of constrained parameters, column ``j`` passed through ``transforms[j]``.
"""

from dataclasses import dataclass

import numpy as np

from . import models
from .errors import DomainError, UnsupportedAtInference


@dataclass
class ParamRequest:
    indices: np.ndarray | None = None
    features: np.ndarray | None = None
    size: int | None = None
    training: bool = True

    def __len__(self):
        if self.indices is not None:
            return len(self.indices)
        if self.features is not None:
            return len(self.features)
        if self.size is not None:
            return self.size
        raise ValueError("request carries neither indices, features nor a size")


@dataclass
class GradRecord:
    """Gradient of the objective with respect to a provider's storage.

    ``dense`` is set for global (shape ``(dim,)``) and predicted (flat head
    gradient) providers; ``rows``/``row_grads`` for data providers.
    ``d_features`` is the gradient with respect to the head input.
    """

    kind: str
    dense: np.ndarray | None = None
    rows: np.ndarray | None = None
    row_grads: np.ndarray | None = None
    d_features: np.ndarray | None = None

    def sq_norm(self):
        g = self.dense if self.dense is not None else self.row_grads
        return float(np.sum(g * g))

    def scaled(self, c):
        return GradRecord(self.kind,
                          None if self.dense is None else self.dense * c,
                          self.rows,
                          None if self.row_grads is None else self.row_grads * c,
                          self.d_features)


def _columnwise(transforms, u, method):
    out = np.empty_like(u)
    for j, t in enumerate(transforms):
        out[:, j] = getattr(t, method)(u[:, j])
    return out


class ParamProvider:
    kind = "?"

    def __init__(self, transforms):
        self.transforms = tuple(transforms)
        if not self.transforms:
            raise ValueError("dim must be >= 1")

    @property
    def dim(self):
        return len(self.transforms)

    def _constrain(self, u):
        return _columnwise(self.transforms, u, "forward")

    def _chain(self, u, upstream):
        upstream = np.asarray(upstream, dtype=float)
        if upstream.shape != u.shape:
            raise ValueError(f"upstream shape {upstream.shape} does not match {u.shape}")
        return upstream * _columnwise(self.transforms, u, "grad")

    def _unconstrain(self, init_value):
        vals = np.broadcast_to(np.asarray(init_value, dtype=float), (self.dim,))
        try:
            return np.array([t.inverse(v) for t, v in zip(self.transforms, vals)], dtype=float)
        except DomainError:
            raise DomainError(f"initial value {init_value} outside the transform codomain") from None

    def get(self, req):
        raise NotImplementedError

    def backward(self, req, upstream):
        raise NotImplementedError

    def space(self):
        return {"kind": self.kind, "count": self.n_params}


class GlobalProvider(ParamProvider):
    kind = "global"

    def __init__(self, transforms, init_value):
        super().__init__(transforms)
        self.store = self._unconstrain(init_value)

    @property
    def n_params(self):
        return self.store.size

    def get(self, req):
        return np.tile(self._constrain(self.store[None, :]), (len(req), 1))

    def backward(self, req, upstream):
        u = np.tile(self.store[None, :], (len(req), 1))
        return GradRecord("global", dense=self._chain(u, upstream).sum(axis=0))

    def constrained(self):
        return self._constrain(self.store[None, :])[0]


class DataProvider(ParamProvider):
    """One parameter row per training index; undefined at inference.

    With ``tied=True`` every index shares row 0.
    """

    kind = "data"

    def __init__(self, transforms, init_value, n, tied=False):
        super().__init__(transforms)
        self.n = int(n)
        self.tied = tied
        row = self._unconstrain(init_value)
        self.store = np.tile(row, (1 if tied else self.n, 1))

    @property
    def n_params(self):
        return self.store.size

    def _rows(self, req):
        if not req.training:
            raise UnsupportedAtInference("data parameters are undefined at inference time")
        if req.indices is None:
            raise UnsupportedAtInference("data parameters need training indices")
        idx = np.asarray(req.indices, dtype=np.int64)
        if np.any(idx < 0) or np.any(idx >= self.n):
            raise IndexError("index outside the training set")
        return np.zeros_like(idx) if self.tied else idx

    def get(self, req):
        return self._constrain(self.store[self._rows(req)])

    def backward(self, req, upstream):
        rows = self._rows(req)
        g = self._chain(self.store[rows], upstream)
        uniq, inv = np.unique(rows, return_inverse=True)
        acc = np.zeros((len(uniq), self.dim))
        np.add.at(acc, inv, g)
        return GradRecord("data", rows=uniq, row_grads=acc)

    def constrained(self):
        return self._constrain(self.store)


class PredictedProvider(ParamProvider):
    """Parameters regressed from features by a head network.

    The head's last layer starts at zero with its bias at the inverse
    transform of ``init_value``, so the initial output is ``init_value`` for
    every input.  Features are standardized with statistics frozen by
    :meth:`calibrate`.  With ``isolated=True`` no gradient reaches the head
    input.
    """

    kind = "predicted"

    def __init__(self, transforms, init_value, n_features, hidden=(), isolated=False,
                 standardize=True, seed=0):
        super().__init__(transforms)
        self.head = models.mlp(n_features, tuple(hidden), self.dim, seed=seed, zero_last=True)
        self.head.kind = "linear" if not hidden else "mlp"
        last_bias = slice(self.head.n_params - self.dim, self.head.n_params)
        self.head.weights[last_bias] = self._unconstrain(init_value)
        self.isolated = isolated
        self.standardize = standardize
        self.mean = np.zeros(n_features)
        self.std = np.ones(n_features)
        self.calibrated = not standardize

    @property
    def n_params(self):
        return self.head.n_params

    @property
    def store(self):
        return self.head.weights

    def calibrate(self, features):
        if self.standardize:
            f = np.asarray(features, dtype=float)
            self.mean = f.mean(axis=0)
            std = f.std(axis=0)
            self.std = np.where(std < 1e-12, 1.0, std)
        self.calibrated = True

    def _forward(self, req):
        if req.features is None:
            raise ValueError("predicted parameters need features")
        f = (np.asarray(req.features, dtype=float) - self.mean) / self.std
        return models.model_forward(self.head, f)

    def get(self, req):
        u, _ = self._forward(req)
        return self._constrain(u)

    def backward(self, req, upstream):
        u, cache = self._forward(req)
        g = self._chain(u, upstream)
        grad, d_in = models.model_backward(self.head, cache, g)
        d_features = np.zeros_like(d_in) if self.isolated else d_in / self.std
        return GradRecord("predicted", dense=grad, d_features=d_features)


def provider_init(kind, dim, transform, init_value, n=None, n_features=None, **options):
    """Build a provider whose constrained output starts at ``init_value``.

    ``transform`` is one TransformSpec (shared by all ``dim`` columns) or a
    sequence of ``dim`` specs.
    """
    transforms = list(transform) if isinstance(transform, (list, tuple)) else [transform] * dim
    if len(transforms) != dim:
        raise ValueError("need one transform per dimension")
    if kind == "global":
        return GlobalProvider(transforms, init_value)
    if kind == "data":
        if n is None:
            raise ValueError("data providers need the training-set size n")
        return DataProvider(transforms, init_value, n, tied=options.get("tied", False))
    if kind == "predicted":
        if n_features is None:
            raise ValueError("predicted providers need n_features")
        return PredictedProvider(transforms, init_value, n_features, **options)
    raise ValueError(f"unknown provider kind {kind!r}")


def get_params(p, req):
    return p.get(req)


def accumulate_grads(p, req, upstream):
    return p.backward(req, upstream)
