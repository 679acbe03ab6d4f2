"""Negative log-likelihoods and their analytic gradients.

Four families are supported: normal (scale ``sigma``), Laplace (scale ``b``),
softmax with temperature ``tau``, and the general robust likelihood with shape
``alpha`` in [0, 3] and scale ``sigma``.  Every NLL keeps its full normalizing
constant so values can be compared across parameter settings.

All functions broadcast over numpy arrays and return arrays (0-d for scalar
inputs); batch reductions are left to the caller.
"""

import math
import threading

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from .errors import DomainError

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
LOG_Z_CAUCHY = math.log(math.pi * math.sqrt(2.0))  # log Z at alpha = 0
ALPHA_MAX = 3.0
ALPHA_BAND = 1e-4
SIGMA_FLOOR = 1e-8


def _finite(*arrays):
    out = []
    for a in arrays:
        a = np.asarray(a, dtype=float)
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite input")
        out.append(a)
    return out


def _positive(name, a):
    if np.any(a <= 0):
        raise DomainError(f"{name} must be > 0")


# --------------------------------------------------------------------- normal

def normal_nll(residual, sigma):
    r, s = _finite(residual, sigma)
    _positive("sigma", s)
    return HALF_LOG_2PI + np.log(s) + r * r / (2.0 * s * s)


def normal_nll_grads(residual, sigma):
    """Return ``(d/d residual, d/d sigma**2)`` of :func:`normal_nll`.

    The variance derivative is (1 - r^2/sigma^2) / (2 sigma^2); it vanishes
    when the squared residual equals the variance.
    """
    r, s = _finite(residual, sigma)
    _positive("sigma", s)
    var = s * s
    d_res = r / var
    d_var = (1.0 - r * r / var) / (2.0 * var)
    return d_res, d_var


def normal_nll_grad_sigma(residual, sigma):
    """Derivative with respect to the standard deviation (chain rule through sigma**2)."""
    _, d_var = normal_nll_grads(residual, sigma)
    return d_var * 2.0 * np.asarray(sigma, dtype=float)


# -------------------------------------------------------------------- laplace

def laplace_nll(residual, b):
    r, b = _finite(residual, b)
    _positive("b", b)
    return np.abs(r) / b + np.log(2.0 * b)


def laplace_nll_grads(residual, b):
    """Return ``(d/d residual, d/d b)``; the residual subgradient at 0 is 0."""
    r, b = _finite(residual, b)
    _positive("b", b)
    return np.sign(r) / b, (1.0 - np.abs(r) / b) / b


# -------------------------------------------------------------------- softmax

def _check_logits(logits, target):
    z = np.asarray(logits, dtype=float)
    if z.ndim == 0 or z.shape[-1] == 0:
        raise ValueError("logits must be a non-empty vector")
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite logits")
    t = np.asarray(target)
    if not np.issubdtype(t.dtype, np.integer):
        if np.any(t != np.round(t)):
            raise ValueError("class targets must be integers")
        t = t.astype(np.int64)
    if np.any(t < 0) or np.any(t >= z.shape[-1]):
        raise ValueError("target class out of range")
    return z, t


def _scaled(z, tau):
    tau = np.asarray(tau, dtype=float)
    if not np.all(np.isfinite(tau)):
        raise ValueError("non-finite temperature")
    _positive("tau", tau)
    return z * tau[..., None], tau


def _log_softmax(u):
    m = np.max(u, axis=-1, keepdims=True)
    shifted = u - m
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def _take(a, t):
    return np.take_along_axis(a, t[..., None], axis=-1)[..., 0]


def softmax_probs(logits, tau=1.0):
    z = np.asarray(logits, dtype=float)
    u, _ = _scaled(z, tau)
    return np.exp(_log_softmax(u))


def softmax_nll(logits, tau, target):
    """-z_y * tau + logsumexp(z * tau), evaluated with max subtraction."""
    z, t = _check_logits(logits, target)
    u, _ = _scaled(z, tau)
    return -_take(_log_softmax(u), t)


def softmax_temp_grad(logits, tau, target):
    z, t = _check_logits(logits, target)
    u, _ = _scaled(z, tau)
    p = np.exp(_log_softmax(u))
    return -_take(z, t) + np.sum(z * p, axis=-1)


def softmax_nll_grads(logits, tau, target):
    """Return ``(d/d logits, d/d tau)``."""
    z, t = _check_logits(logits, target)
    u, tau = _scaled(z, tau)
    p = np.exp(_log_softmax(u))
    onehot = np.zeros_like(p)
    np.put_along_axis(onehot, t[..., None], 1.0, axis=-1)
    d_logits = tau[..., None] * (p - onehot)
    d_tau = -_take(z, t) + np.sum(z * p, axis=-1)
    return d_logits, d_tau


# --------------------------------------------------------------------- robust

def _robust_terms(x, alpha, sigma, need_alpha=False):
    x, alpha, sigma = np.broadcast_arrays(*_finite(x, alpha, sigma))
    if np.any(alpha < 0) or np.any(alpha > ALPHA_MAX):
        raise DomainError("alpha must lie in [0, 3]")
    if np.any(sigma < SIGMA_FLOOR):
        raise DomainError("sigma must be >= 1e-8")
    q = (x / sigma) ** 2
    near2 = np.abs(alpha - 2.0) < ALPHA_BAND
    near0 = alpha < ALPHA_BAND
    generic = ~(near2 | near0)
    a = np.where(generic, alpha, 1.0)
    b = np.where(generic, np.abs(alpha - 2.0), 1.0)
    log_t = np.log1p(q / b)
    e = np.expm1(0.5 * a * log_t)
    rho = np.where(near2, 0.5 * q, np.where(near0, np.log1p(0.5 * q), b / a * e))
    drho_dq = np.where(near2, 0.5,
                       np.where(near0, 0.5 / (1.0 + 0.5 * q),
                                0.5 * np.exp((0.5 * a - 1.0) * log_t)))
    drho_da = None
    if need_alpha:
        s = np.sign(a - 2.0)
        w = q / b
        t_pow = e + 1.0
        drho_da = ((s / a - b / (a * a)) * e
                   + 0.5 * (b / a) * t_pow * log_t
                   - 0.5 * s * w * t_pow / (1.0 + w))
        # inside the bands the limit forms do not depend on alpha
        drho_da = np.where(generic, drho_da, 0.0)
    return q, rho, drho_dq, drho_da


def robust_rho(x, alpha, sigma):
    _, rho, _, _ = _robust_terms(x, alpha, sigma)
    return rho


def _log_partition_integral(alpha):
    # Z = 2 * int_0^inf exp(-rho(x)) dx with x = e^u; the integrand decays
    # like exp(-u) or faster at both ends for every alpha in [0, 3].
    def f(u):
        x = math.exp(u)
        return math.exp(u - float(robust_rho(x, alpha, 1.0)))
    val, _ = quad(f, -40.0, 40.0, limit=500, epsabs=1e-14, epsrel=1e-13)
    return math.log(2.0 * val)


class _PartitionTable:
    """log Z(alpha) on 256 knots clustered towards alpha = 0 and alpha = 2.

    log Z is not smooth at alpha = 2 (the |alpha - 2| in rho), so the two
    sides get separate monotone cubic interpolants.
    """

    def __init__(self):
        s = np.linspace(0.0, 1.0, 171)
        left = 1.0 - np.cos(np.pi * s)
        left[0], left[-1] = 0.0, 2.0
        s = np.linspace(0.0, 1.0, 86)
        right = 2.0 + (1.0 - np.cos(0.5 * np.pi * s))
        right[0], right[-1] = 2.0, ALPHA_MAX
        self.knots = np.unique(np.concatenate([left, right]))

        def values(grid):
            v = np.array([_log_partition_integral(a) for a in grid])
            v[grid == 0.0] = LOG_Z_CAUCHY
            v[grid == 2.0] = HALF_LOG_2PI
            return v

        self.left = PchipInterpolator(left, values(left))
        self.right = PchipInterpolator(right, values(right))
        self.d_left = self.left.derivative()
        self.d_right = self.right.derivative()

    def __call__(self, alpha, derivative=False):
        lo = alpha < 2.0
        if derivative:
            return np.where(lo, self.d_left(np.minimum(alpha, 2.0)),
                            self.d_right(np.maximum(alpha, 2.0)))
        return np.where(lo, self.left(np.minimum(alpha, 2.0)),
                        self.right(np.maximum(alpha, 2.0)))


_table = None
_table_lock = threading.Lock()


def _partition_table():
    global _table
    if _table is None:
        with _table_lock:
            if _table is None:
                _table = _PartitionTable()
    return _table


def _check_alpha(alpha):
    (a,) = _finite(alpha)
    if np.any(a < 0) or np.any(a > ALPHA_MAX):
        raise DomainError("alpha must lie in [0, 3]")
    return a


def robust_log_partition(alpha):
    """log Z(alpha), exact at alpha in {0, 2} and interpolated elsewhere."""
    a = _check_alpha(alpha)
    out = _partition_table()(a)
    out = np.where(a == 0.0, LOG_Z_CAUCHY, out)
    return np.where(a == 2.0, HALF_LOG_2PI, out)


def robust_log_partition_grad(alpha):
    """Derivative of the interpolant; one-sided at 0, 2 and 3."""
    return _partition_table()(_check_alpha(alpha), derivative=True)


def robust_nll(residual, alpha, sigma):
    _, rho, _, _ = _robust_terms(residual, alpha, sigma)
    return np.log(np.asarray(sigma, dtype=float)) + robust_log_partition(alpha) + rho


def robust_nll_grads(residual, alpha, sigma):
    """Return ``(d/d residual, d/d alpha, d/d sigma)`` of :func:`robust_nll`."""
    x = np.asarray(residual, dtype=float)
    s = np.asarray(sigma, dtype=float)
    q, _, drho_dq, drho_da = _robust_terms(x, alpha, s, need_alpha=True)
    d_res = drho_dq * 2.0 * x / (s * s)
    d_sigma = 1.0 / s - drho_dq * 2.0 * q / s
    d_alpha = drho_da + robust_log_partition_grad(alpha)
    return d_res, d_alpha, d_sigma
