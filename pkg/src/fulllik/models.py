"""Small dense predictors with hand-written reverse-mode gradients.

A model is a stack of dense layers stored in one flat weight vector (per layer:
the ``fan_in x fan_out`` matrix row-major, then the bias).  Hidden layers use
ReLU; the last layer is affine.  Autoencoders apply inverted dropout to the
input of the code layer during training.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .data import stream
from .errors import InvalidStateError


@dataclass(eq=False)
class ModelSpec:
    kind: str
    n_in: int
    n_out: int
    layers: tuple          # ((fan_in, fan_out, activation), ...)
    weights: np.ndarray
    dropout: float = 0.0
    dropout_layer: int | None = None
    init: str = "glorot-uniform"
    code: int | None = None
    version: int = field(default=0)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} weights, got {self.weights.shape}")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("non-finite weights")

    @property
    def n_params(self):
        return sum(i * o + o for i, o, _ in self.layers)

    def _offsets(self):
        off = 0
        for i, o, act in self.layers:
            yield off, off + i * o, off + i * o + o, (i, o), act
            off += i * o + o

    def unpack(self, flat=None):
        flat = self.weights if flat is None else flat
        return [(flat[a:b].reshape(shape), flat[b:c], act) for a, b, c, shape, act in self._offsets()]

    def weight_mask(self):
        """True for multiplicative weights, False for biases."""
        mask = np.zeros(self.n_params, dtype=bool)
        for a, b, _, _, _ in self._offsets():
            mask[a:b] = True
        return mask

    def set_weights(self, w):
        w = np.asarray(w, dtype=float)
        if w.shape != self.weights.shape:
            raise ValueError("weight shape mismatch")
        self.weights = w.copy()
        self.version += 1

    def bump(self):
        """Mark in-place weight edits so cached forward passes become stale."""
        self.version += 1

    def copy(self):
        return ModelSpec(self.kind, self.n_in, self.n_out, self.layers, self.weights.copy(),
                         self.dropout, self.dropout_layer, self.init, self.code)

    def describe(self):
        return {"kind": self.kind, "n_in": self.n_in, "n_out": self.n_out,
                "layers": [list(l) for l in self.layers], "dropout": self.dropout,
                "init": self.init, "code": self.code, "n_params": self.n_params}


def _init_weights(layers, seed, init, zero_last=False):
    g = stream(seed, "model_init", init)
    parts = []
    for k, (i, o, _) in enumerate(layers):
        if zero_last and k == len(layers) - 1:
            w = np.zeros((i, o))
        elif init == "glorot-uniform":
            lim = math.sqrt(6.0 / (i + o))
            w = g.uniform(-lim, lim, (i, o))
        elif init == "he":
            w = g.normal(0.0, math.sqrt(2.0 / i), (i, o))
        elif init == "zeros":
            w = np.zeros((i, o))
        else:
            raise ValueError(f"unknown initialization {init!r}")
        parts += [w.ravel(), np.zeros(o)]
    return np.concatenate(parts) if parts else np.zeros(0)


def linear(n_in, n_out, seed=0, init="glorot-uniform"):
    layers = ((n_in, n_out, "identity"),)
    return ModelSpec("linear", n_in, n_out, layers, _init_weights(layers, seed, init), init=init)


def mlp(n_in, hidden, n_out, seed=0, init="glorot-uniform", zero_last=False):
    sizes = [n_in, *hidden, n_out]
    layers = tuple((sizes[k], sizes[k + 1], "relu" if k < len(hidden) else "identity")
                   for k in range(len(sizes) - 1))
    return ModelSpec("mlp", n_in, n_out, layers, _init_weights(layers, seed, init, zero_last),
                     init=init)


def autoencoder(n_in, code, depth=1, hidden=None, dropout=0.2, seed=0, init="glorot-uniform"):
    """depth=0 is a linear autoencoder; depth>=1 adds ``depth`` ReLU layers per side."""
    if code >= n_in:
        raise ValueError("code dimension must be smaller than the input dimension")
    h = hidden or max(2 * code, min(64, 2 * n_in))
    enc = [n_in] + [h] * depth + [code]
    dec = [code] + [h] * depth + [n_in]
    layers = []
    for sizes in (enc, dec):
        for k in range(len(sizes) - 1):
            act = "relu" if k < len(sizes) - 2 else "identity"
            layers.append((sizes[k], sizes[k + 1], act))
    layers = tuple(layers)
    return ModelSpec("autoencoder", n_in, n_in, layers, _init_weights(layers, seed, init),
                     dropout=dropout, dropout_layer=depth, init=init, code=code)


def identity(n):
    """A weightless pass-through, used when predictions are fixed (recalibration)."""
    return ModelSpec("identity", n, n, (), np.zeros(0))


def model_forward(m, x, train=False, rng=None):
    """Return ``(predictions, cache)``; dropout is active only when ``train``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != m.n_in:
        raise ValueError(f"expected input of width {m.n_in}, got shape {x.shape}")
    cache = {"version": m.version, "x": x, "inputs": [], "pre": [], "masks": []}
    h = x
    for k, (w, b, act) in enumerate(m.unpack()):
        mask = None
        if train and m.dropout > 0 and k == m.dropout_layer:
            if rng is None:
                raise ValueError("dropout needs a random generator")
            mask = (rng.random(h.shape) >= m.dropout) / (1.0 - m.dropout)
            h = h * mask
        cache["masks"].append(mask)
        cache["inputs"].append(h)
        z = h @ w + b
        cache["pre"].append(z)
        h = np.maximum(z, 0.0) if act == "relu" else z
    return h, cache


def penultimate(cache):
    """Input to the final layer (the representation a feature head would read)."""
    return cache["inputs"][-1] if cache["inputs"] else cache["x"]


def model_backward(m, cache, upstream, hidden_upstream=None):
    """Return ``(flat weight gradient, input gradient)``.

    ``hidden_upstream`` adds a gradient with respect to :func:`penultimate`.
    """
    if cache["version"] != m.version:
        raise InvalidStateError("forward cache is stale; weights changed since the forward pass")
    grad = np.zeros(m.n_params)
    g = np.asarray(upstream, dtype=float)
    params = m.unpack()
    spans = list(m._offsets())
    if not params:
        return grad, g if hidden_upstream is None else g + hidden_upstream
    if g.shape != cache["pre"][-1].shape:
        raise ValueError("upstream gradient shape mismatch")
    for k in range(len(params) - 1, -1, -1):
        w, _, act = params[k]
        a, b, c, shape, _ = spans[k]
        if act == "relu":
            g = g * (cache["pre"][k] > 0)
        grad[a:b] = (cache["inputs"][k].T @ g).ravel()
        grad[b:c] = g.sum(axis=0)
        g = g @ w.T
        if k == len(params) - 1 and hidden_upstream is not None:
            g = g + hidden_upstream
        if cache["masks"][k] is not None:
            g = g * cache["masks"][k]
    return grad, g
