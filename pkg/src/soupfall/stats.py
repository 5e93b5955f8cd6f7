"""Small statistical helpers shared by the estimators."""
from __future__ import annotations

import math

import numpy as np
from scipy import stats

Z95 = float(stats.norm.ppf(0.975))


def wilson(successes, trials, z: float = Z95):
    """Wilson score interval; works elementwise on arrays."""
    k = np.asarray(successes, dtype=float)
    n = np.asarray(trials, dtype=float)
    p = np.divide(k, n, out=np.zeros_like(k), where=n > 0)
    z2 = z * z
    denom = 1 + z2 / n
    mid = (p + z2 / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    return np.clip(mid - half, 0.0, 1.0), np.clip(mid + half, 0.0, 1.0)


def mean_ci(x, z: float = Z95) -> tuple[float, float]:
    """Sample mean and the normal-approximation half-width of its interval."""
    x = np.asarray(x, dtype=float)
    if len(x) == 0:
        return math.nan, math.nan
    if len(x) == 1:
        return float(x[0]), 0.0
    return float(x.mean()), float(z * x.std(ddof=1) / math.sqrt(len(x)))
