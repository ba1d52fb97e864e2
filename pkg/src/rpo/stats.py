"""Robust univariate statistics: median and median absolute deviation.

These two estimators normalize every projected distance in the outlyingness
score, so they are kept raw: no Gaussian consistency factor is applied to
the MAD (a factor would rescale each projection differently and change the
score). Even-length medians average the two central order statistics.
"""

from __future__ import annotations

import numpy as np


def _as_sample(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D sample, got shape {v.shape}")
    if v.size == 0:
        raise ValueError("empty sample")
    if not np.all(np.isfinite(v)):
        raise ValueError("sample contains NaN or infinite entries")
    return v


def median(values) -> float:
    """Median of a nonempty finite sample."""
    return float(np.median(_as_sample(values)))


def mad(values, center: float) -> float:
    """Median absolute deviation around ``center``, without consistency factor."""
    v = _as_sample(values)
    if not np.isfinite(center):
        raise ValueError(f"center must be finite, got {center}")
    return float(np.median(np.abs(v - center)))
