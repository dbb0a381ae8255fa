"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np

from .distances import DistanceSpec


def make_spec(distance, p=2.0, cutoff=None, base=None) -> DistanceSpec:
    if isinstance(distance, DistanceSpec):
        return distance
    return DistanceSpec(distance, p=p, cutoff=cutoff, base=base)


def check_distance_matrix(D, square=True):
    D = np.asarray(D, dtype=float)
    if D.ndim != 2:
        raise ValueError(f"expected a 2-D distance matrix, got shape {D.shape}")
    if square and D.shape[0] != D.shape[1]:
        raise ValueError(f"expected a square distance matrix, got shape {D.shape}")
    if not np.all(np.isfinite(D)) or np.any(D < 0):
        raise ValueError("distances must be finite and non-negative")
    return D


def check_labels(y, n):
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != n:
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    return y


def check_percentile(q):
    if not 0 <= q <= 100:
        raise ValueError(f"percentile must lie in [0, 100], got {q}")
    return float(q)
