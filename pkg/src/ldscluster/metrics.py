"""Clustering F1 for unlabeled cluster indices, and trial aggregation.

Clusterings carry no class names, so the binary score is computed under
both conventions (predicted cluster 0 as the positive class, then cluster
1) and the larger F1 wins; a bit-flip of the predicted labels therefore
never changes the score.  For more than two clusters the mean per-class F1
is maximized over all permutations of the predicted labels.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .cluster import Assignment

__all__ = ["TrialStats", "f1_pair", "aggregate"]

# Normal-approximation 95% interval.
CI_Z = 1.96


@dataclass(eq=False)
class TrialStats:
    """Mean and 95% confidence half-width over repeated trials."""

    mean: float
    ci_half_width: float
    n_trials: int
    raw: np.ndarray


def _binary_f1(predicted: np.ndarray, truth: np.ndarray) -> float:
    # Positive class is 1; zero precision+recall scores 0 by convention.
    tp = int(np.sum((predicted == 1) & (truth == 1)))
    fp = int(np.sum((predicted == 1) & (truth == 0)))
    fn = int(np.sum((predicted == 0) & (truth == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _as_labels(x) -> np.ndarray:
    if isinstance(x, Assignment):
        return x.labels
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ValueError(f"labels must be 1-D, got shape {arr.shape}")
    return arr.astype(np.int64)


def f1_pair(predicted, truth, k: int = 2) -> float:
    """Clustering F1 of a predicted assignment against ground truth.

    k=2: both label vectors must be binary; returns the max of F1 computed
    on the predicted labels and on their bit-flip.  k in 3..6: returns the
    best mean per-class F1 over every permutation of predicted labels,
    averaging over the classes present in the truth.
    """
    pred = _as_labels(predicted)
    if isinstance(predicted, Assignment):
        k = predicted.k
    truth = _as_labels(truth)
    if len(pred) != len(truth):
        raise ValueError(f"length mismatch: {len(pred)} predicted vs {len(truth)} truth")
    if len(pred) == 0:
        raise ValueError("empty label vectors")

    if k <= 2:
        for name, arr in (("predicted", pred), ("truth", truth)):
            if arr.min() < 0 or arr.max() > 1:
                raise ValueError(f"{name} labels must be binary for the k=2 score")
        return max(_binary_f1(pred, truth), _binary_f1(1 - pred, truth))

    if k > 6:
        raise ValueError(f"permutation search supports k <= 6, got {k}")
    if pred.min() < 0 or pred.max() >= k:
        raise ValueError(f"predicted labels must lie in [0, {k})")
    classes = np.unique(truth)
    best = 0.0
    for perm in itertools.permutations(range(k)):
        mapping = np.array(perm)
        mapped = mapping[pred]
        score = float(np.mean([
            _binary_f1((mapped == c).astype(int), (truth == c).astype(int))
            for c in classes
        ]))
        best = max(best, score)
    return best


def aggregate(raw) -> TrialStats:
    """Mean and normal-approximation 95% CI half-width of trial scores.

    ci_half_width = 1.96 * sample_stddev / sqrt(n); needs n >= 2.
    """
    arr = np.asarray(raw, dtype=np.float64).ravel()
    n = arr.size
    if n < 2:
        raise ValueError(f"aggregate needs at least 2 trials, got {n}")
    mean = float(arr.mean())
    half = float(CI_Z * arr.std(ddof=1) / np.sqrt(n))
    return TrialStats(mean=mean, ci_half_width=half, n_trials=n, raw=arr.copy())
