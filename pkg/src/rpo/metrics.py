"""Ranking metrics: AUC with midrank tie handling.

AUC is the probability that a random anomaly outscores a random normal
sample, with ties counted half. Computed in O(n log n) from midranks; the
test suite checks it against the O(n^2) pairwise definition.
"""

from __future__ import annotations

import numpy as np


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # 1-based midrank
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float:
    """AUC of ``scores`` against binary labels; anomalies (1) are positive.

    Raises ``ValueError`` when only one class is present.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError(
            f"scores and labels must be equal-length vectors, got {scores.shape} and {labels.shape}"
        )
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores contain NaN or infinite entries")
    positive = labels == 1
    n_pos = int(np.count_nonzero(positive))
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    ranks = _midranks(scores)
    rank_sum = float(np.sum(ranks[positive]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def mean_std(values, ddof: int = 1) -> tuple[float, float]:
    """Sample mean and standard deviation (ddof=1; 0.0 for a single value)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot aggregate zero values")
    std = float(np.std(v, ddof=ddof)) if v.size > ddof else 0.0
    return float(np.mean(v)), std


def truncate(value: float, decimals: int = 2) -> float:
    """Truncate (not round) toward zero; for report tables only."""
    scale = 10.0**decimals
    return np.trunc(value * scale) / scale
