"""Independent reference implementations used by the tests.

These are deliberately naive (explicit loops, direct formulas) so that they
share no code path with the package.
"""

from __future__ import annotations

import math

import numpy as np


def mann_whitney_auc(scores, labels) -> float:
    """Fraction of (positive, negative) pairs ranked correctly; ties count half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for p in pos:
        for n in neg:
            wins += 1.0 if p > n else 0.5 if p == n else 0.0
    return wins / (len(pos) * len(neg))


def window_moments(values) -> tuple[float, float, float, float]:
    """Population mean, std, skewness and kurtosis (non-excess) of one window.

    A window without spread has skew and kurtosis 0.
    """
    xs = [float(v) for v in values]
    n = len(xs)
    mean = math.fsum(xs) / n
    m2 = math.fsum((x - mean) ** 2 for x in xs) / n
    m3 = math.fsum((x - mean) ** 3 for x in xs) / n
    m4 = math.fsum((x - mean) ** 4 for x in xs) / n
    std = math.sqrt(m2)
    if std < 1e-12:
        return mean, std, 0.0, 0.0
    return mean, std, m3 / std**3, m4 / m2**2


def first_differences(values) -> list[float]:
    out = [0.0]
    for a, b in zip(values[:-1], values[1:]):
        out.append(b - a)
    return out


def median(values) -> float:
    xs = sorted(values)
    n = len(xs)
    mid = n // 2
    return xs[mid] if n % 2 else 0.5 * (xs[mid - 1] + xs[mid])


def leaf_weight(grad, hess, reg_lambda: float) -> float:
    return -sum(grad) / (sum(hess) + reg_lambda)


def weighted_log_loss(y, p, w) -> float:
    y, p, w = (np.asarray(a, dtype=np.float64) for a in (y, p, w))
    return float(-np.sum(w * (y * np.log(p) + (1 - y) * np.log(1 - p))) / np.sum(w))
