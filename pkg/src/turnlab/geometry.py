"""Distances between finite point sets."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

_BRUTE_LIMIT = 4_000_000  # pairwise-matrix budget before switching to trees


def _as_points(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] == 0:
        raise ValueError("point set must be a nonempty (m, d) array")
    return a


def directed_hausdorff(a, b) -> float:
    """max over a of the distance to the nearest point of b."""
    a, b = _as_points(a), _as_points(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError("point sets must share a dimension")
    if a.shape[0] * b.shape[0] <= _BRUTE_LIMIT:
        return float(cdist(a, b).min(axis=1).max())
    d, _ = cKDTree(b).query(a, k=1)
    return float(np.max(d))


def hausdorff_distance(a, b) -> float:
    return max(directed_hausdorff(a, b), directed_hausdorff(b, a))


def min_distance(point, pts) -> float:
    """Distance from one point to the nearest element of a finite set."""
    pts = _as_points(pts)
    p = np.asarray(point, dtype=float).ravel()
    return float(np.sqrt(((pts - p) ** 2).sum(axis=1)).min())
