"""First-order optimizers updating numpy arrays in place."""

import numpy as np

from .errors import DivergedError


class SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, param, grad, rows=None):
        if rows is None:
            param -= self.lr * grad
        else:
            param[rows] -= self.lr * grad


class Adam:
    """Adam with bias correction; the first step has magnitude ``lr`` per entry."""

    def __init__(self, lr, beta1=0.9, beta2=0.99, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, param, grad, rows=None):
        if self.m is None:
            self.m = np.zeros_like(param)
            self.v = np.zeros_like(param)
        if rows is not None:
            dense = np.zeros_like(param)
            dense[rows] = grad
            grad = dense
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        param -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class SparseRMSProp:
    """RMSProp that touches only the rows present in the gradient.

    Rows without a gradient this step keep both their value and their
    second-moment accumulator bit-for-bit.
    """

    def __init__(self, lr, decay=0.9, eps=1e-10):
        self.lr, self.decay, self.eps = lr, decay, eps
        self.ms = None

    def step(self, param, grad, rows=None):
        if self.ms is None:
            self.ms = np.zeros_like(param)
        if rows is None:
            self.ms = self.decay * self.ms + (1 - self.decay) * grad * grad
            param -= self.lr * grad / np.sqrt(self.ms + self.eps)
            return
        ms = self.decay * self.ms[rows] + (1 - self.decay) * grad * grad
        self.ms[rows] = ms
        param[rows] -= self.lr * grad / np.sqrt(ms + self.eps)


def make_optimizer(kind, lr, beta1=0.9, beta2=0.99):
    if lr <= 0:
        raise ValueError("learning rate must be > 0")
    if kind == "adam":
        return Adam(lr, beta1, beta2)
    if kind == "sgd":
        return SGD(lr)
    if kind == "rmsprop_sparse":
        return SparseRMSProp(lr)
    raise ValueError(f"unknown optimizer {kind!r}")


def optimizer_step(opt, param, grad, rows=None):
    """Apply one update; non-finite gradients abort before touching ``param``."""
    if not np.all(np.isfinite(grad)):
        raise DivergedError("non-finite gradient")
    opt.step(param, grad, rows)
    return param


def clip_scale(sq_norms, clip_norm):
    """Factor that rescales a gradient with the given squared norms to ``clip_norm``."""
    if clip_norm is None or not np.isfinite(clip_norm):
        return 1.0
    norm = float(np.sqrt(sum(sq_norms)))
    return 1.0 if norm <= clip_norm else clip_norm / norm
