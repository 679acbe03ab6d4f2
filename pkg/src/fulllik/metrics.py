"""Evaluation metrics."""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr
from scipy.stats import rankdata

from .errors import UndefinedMetricError


@dataclass
class MetricReport:
    name: str
    value: float
    auxiliary: dict = field(default_factory=dict)


def mse(pred, target):
    p = np.asarray(pred, dtype=float)
    t = np.asarray(target, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("empty input")
    return float(np.mean((p - t) ** 2))


def nll_mean(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("empty input")
    return float(np.mean(v))


def reliability_bins(probs, labels, bins=15):
    """Per-bin counts, accuracy and mean confidence of the top class.

    Bin ``b`` holds confidences in ``(b/bins, (b+1)/bins]``.
    """
    p = np.asarray(probs, dtype=float)
    y = np.asarray(labels)
    if p.ndim != 2 or len(p) == 0:
        raise ValueError("probs must be a non-empty (n, classes) matrix")
    conf = p.max(axis=1)
    correct = (p.argmax(axis=1) == y).astype(float)
    idx = np.clip(np.ceil(conf * bins).astype(int) - 1, 0, bins - 1)
    count = np.bincount(idx, minlength=bins).astype(float)
    acc = np.bincount(idx, weights=correct, minlength=bins)
    cf = np.bincount(idx, weights=conf, minlength=bins)
    nz = count > 0
    acc[nz] /= count[nz]
    cf[nz] /= count[nz]
    return count, acc, cf


def ece(probs, labels, bins=15):
    count, acc, conf = reliability_bins(probs, labels, bins)
    return float(np.sum(count / count.sum() * np.abs(acc - conf)))


def cal_from_cdf(cdf_values, levels=10):
    """Sum over levels p_j of (p_j - fraction of cdf values <= p_j)^2."""
    f = np.asarray(cdf_values, dtype=float)
    if f.size == 0:
        raise ValueError("empty input")
    p = np.arange(1, levels + 1) / levels
    emp = np.mean(f[None, :] <= p[:, None], axis=1)
    return float(np.sum((p - emp) ** 2))


def cal_regression(pred_mean, pred_sigma, targets, levels=10):
    """Regression calibration error of normal predictive distributions."""
    mu = np.asarray(pred_mean, dtype=float)
    s = np.asarray(pred_sigma, dtype=float)
    y = np.asarray(targets, dtype=float)
    if mu.size == 0:
        raise ValueError("empty input")
    if np.any(s < 0):
        raise ValueError("sigma must be non-negative")
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (y - mu) / s
    # sigma -> 0: a point mass at the mean
    z = np.where(s == 0, np.where(y >= mu, np.inf, -np.inf), z)
    return cal_from_cdf(ndtr(z), levels)


def _binary(scores, labels):
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(int)
    if s.shape != y.shape:
        raise ValueError("scores and labels must have equal length")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise UndefinedMetricError("both classes must be present")
    return s, y, n_pos


def roc_auc(scores, labels):
    """Mann-Whitney AUC with midranks for ties."""
    s, y, n_pos = _binary(scores, labels)
    n_neg = len(y) - n_pos
    r = rankdata(s)
    return float((r[y == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _thresholds(s, y):
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tp = np.cumsum(y)[last]
    fp = (last + 1) - tp
    return tp, fp


def roc_curve(scores, labels):
    s, y, n_pos = _binary(scores, labels)
    tp, fp = _thresholds(s, y)
    return np.r_[0.0, fp / (len(y) - n_pos)], np.r_[0.0, tp / n_pos]


def pr_curve(scores, labels):
    s, y, n_pos = _binary(scores, labels)
    tp, fp = _thresholds(s, y)
    return tp / n_pos, tp / (tp + fp)


def aupr(scores, labels):
    """Area under the step-interpolated precision-recall curve."""
    recall, precision = pr_curve(scores, labels)
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))
