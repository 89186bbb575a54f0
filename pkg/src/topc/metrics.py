"""Field error norms and persistence diagram distances.

Diagram distances match pairs only within a class. Matched pairs cost the
d-infinity distance of their (birth, death) points. Any pair, on either
side, may instead stay unmatched and collapse onto its own birth level at a
cost equal to its persistence. When one diagram contains the other this
gives the largest (or total) persistence of the missing pairs, and
zero-persistence pairs never change a distance.
``unmatched="diagonal"`` switches to the classical convention where an
unmatched pair goes to the diagonal at half its persistence.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .field import ScalarField
from .persistence import PairClass, PersistenceDiagram

MAX_ASSIGNMENT = 2000
CONVENTIONS = ("collapse", "diagonal")


def _arrays(f, g):
    if isinstance(f, ScalarField) and isinstance(g, ScalarField) and tuple(f.dims) != tuple(g.dims):
        raise ValueError(f"dims mismatch: {tuple(f.dims)} vs {tuple(g.dims)}")
    a = np.asarray(f.values if isinstance(f, ScalarField) else f, dtype=np.float64).ravel()
    b = np.asarray(g.values if isinstance(g, ScalarField) else g, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"size mismatch: {a.size} vs {b.size} vertices")
    return a, b


def p_norm(f, g, p: float = 2) -> float:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a, b = _arrays(f, g)
    d = np.abs(a - b)
    top = d.max(initial=0.0)
    if top == 0:
        return 0.0
    # scale by the largest difference so large p does not overflow
    return float(top * np.sum((d / top) ** p) ** (1.0 / p))


def max_norm(f, g) -> float:
    a, b = _arrays(f, g)
    return float(np.abs(a - b).max(initial=0.0))


def psnr(f, g) -> float:
    """20 log10((sqrt(n_v) / 2) * range(f) / ||f - g||_2); ``inf`` when f == g."""
    a, b = _arrays(f, g)
    l2 = p_norm(a, b, 2)
    if l2 == 0:
        return math.inf
    return 20.0 * math.log10(math.sqrt(a.size) / 2.0 * float(np.ptp(a)) / l2)


def pair_distance(p, q) -> float:
    """d-infinity distance between two pairs seen as (birth, death) points."""
    return max(abs(p.birth_value - q.birth_value), abs(p.death_value - q.death_value))


def _points(diagram: PersistenceDiagram, cls) -> np.ndarray:
    sub = diagram.of_class(cls)
    return np.column_stack([sub.birth_value, sub.death_value])


def _cost_matrix(big: np.ndarray, small: np.ndarray, convention: str):
    """Square cost matrix whose optimal assignments are admissible matchings.

    Row i >= n and column j >= m are the "unmatched" slots of the other side.
    """
    n, m = len(big), len(small)
    size = n + m
    if size > MAX_ASSIGNMENT:
        raise ValueError(f"assignment of size {size}x{size} exceeds the {MAX_ASSIGNMENT} limit")
    scale = 1.0 if convention == "collapse" else 0.5
    cross = np.maximum(
        np.abs(big[:, None, 0] - small[None, :, 0]),
        np.abs(big[:, None, 1] - small[None, :, 1]),
    )
    cost = np.zeros((size, size))
    cost[:n, :m] = cross
    cost[:n, m:] = np.where(np.eye(n, dtype=bool), scale * (big[:, 1] - big[:, 0])[:, None], np.inf)
    cost[n:, :m] = np.where(np.eye(m, dtype=bool), scale * (small[:, 1] - small[:, 0])[None, :], np.inf)
    return cost


def _class_blocks(d1: PersistenceDiagram, d2: PersistenceDiagram, unmatched: str):
    if unmatched not in CONVENTIONS:
        raise ValueError(f"unknown convention {unmatched!r}; expected one of {CONVENTIONS}")
    for cls in PairClass:
        a, b = _points(d1, cls), _points(d2, cls)
        big, small = (a, b) if len(a) >= len(b) else (b, a)
        if len(big) == 0:
            continue
        yield _cost_matrix(big, small, unmatched)


def _min_bottleneck(cost: np.ndarray) -> float:
    finite = np.isfinite(cost)
    candidates = np.unique(cost[finite])
    lo, hi = 0, candidates.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        graph = csr_matrix(finite & (cost <= candidates[mid]))
        match = maximum_bipartite_matching(graph, perm_type="column")
        if np.all(match >= 0):
            hi = mid
        else:
            lo = mid + 1
    return float(candidates[lo])


def bottleneck(d1: PersistenceDiagram, d2: PersistenceDiagram, *, unmatched: str = "collapse") -> float:
    """Smallest achievable largest matching cost, classes matched separately."""
    return max((_min_bottleneck(c) for c in _class_blocks(d1, d2, unmatched)), default=0.0)


def wasserstein(d1: PersistenceDiagram, d2: PersistenceDiagram, *, unmatched: str = "collapse") -> float:
    """Smallest achievable sum of matching costs, classes matched separately."""
    parts = []
    for cost in _class_blocks(d1, d2, unmatched):
        rows, cols = linear_sum_assignment(np.where(np.isfinite(cost), cost, 1e300))
        parts.extend(cost[rows, cols].tolist())
    return math.fsum(parts)
