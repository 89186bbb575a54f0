"""Topological simplification by flooding sub- and sur-level set components.

Given the extrema to preserve, non-preserved minima are removed by an
ascending priority flood seeded at the preserved minima: every basin not
containing a seed is raised to the level at which the flood enters it and
ordered right after its entry vertex. A descending flood from the preserved
maxima does the same for maxima. Both passes alternate until the field has
exactly the prescribed extrema. Vertex offsets of the result are the final
flood order, so flat plateaus never hide spurious extrema.

Flooding alone can drag a preserved saddle along with a removed basin that
surrounds it. Callers may name such saddles as anchors: when one moves, a
path from it to the preserved extrema is carved just past its value in the
input and the floods are run again.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ReconstructionError
from .field import ScalarField, build_field
from .persistence import PairClass, PersistenceDiagram


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    minima: np.ndarray
    maxima: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "minima", np.unique(np.asarray(self.minima, dtype=np.int64)))
        object.__setattr__(self, "maxima", np.unique(np.asarray(self.maxima, dtype=np.int64)))
        if self.minima.size == 0 or self.maxima.size == 0:
            raise ReconstructionError("constraints need at least one minimum and one maximum")


def constraints_from_diagram(diagram: PersistenceDiagram) -> ConstraintSet:
    """Extrema of every pair in ``diagram`` (essential pair included)."""
    cls = diagram.pair_class
    minima = np.concatenate([
        diagram.birth_vertex[cls == PairClass.MIN_SADDLE],
        diagram.birth_vertex[cls == PairClass.ESSENTIAL],
    ])
    maxima = np.concatenate([
        diagram.death_vertex[cls == PairClass.SADDLE_MAX],
        diagram.death_vertex[cls == PairClass.ESSENTIAL],
    ])
    return ConstraintSet(minima, maxima)


def extrema(field: ScalarField, rank=None):
    """Sorted (minima, maxima) vertex ids of ``field`` under its total order."""
    rank = field.order.rank if rank is None else rank
    nx, ny, nz = field.dims
    flags = _kernels.extremum_flags(rank, nx, ny, nz, field.edge_offsets)
    return np.flatnonzero(flags < 0), np.flatnonzero(flags > 0)


def _flood(field: ScalarField, constraints: ConstraintSet, max_iter: int) -> ScalarField:
    n = field.n_vertices
    nx, ny, nz = field.dims
    offs = field.edge_offsets
    values = field.values
    order = field.order.order.copy()
    rank = field.order.rank.copy()
    changed = False
    for _ in range(max_iter):
        flags = _kernels.extremum_flags(rank, nx, ny, nz, offs)
        mins, maxs = np.flatnonzero(flags < 0), np.flatnonzero(flags > 0)
        if np.array_equal(mins, constraints.minima) and np.array_equal(maxs, constraints.maxima):
            if not changed:
                return field
            return build_field(field.dims, values, rank)
        changed = True
        values, seq = _kernels.flood(values, order, rank, constraints.minima, nx, ny, nz, offs, False)
        order = seq
        rank[order] = np.arange(n)
        values, seq = _kernels.flood(values, order, rank, constraints.maxima, nx, ny, nz, offs, True)
        order = seq[::-1].copy()
        rank[order] = np.arange(n)
    mins, maxs = extrema(field.with_values(values, rank))
    missing = np.setdiff1d(np.concatenate([constraints.minima, constraints.maxima]),
                           np.concatenate([mins, maxs]))
    raise ReconstructionError(
        f"constraints not attained after {max_iter} passes "
        f"({len(mins)} minima, {len(maxs)} maxima; unattainable: {missing[:10].tolist()})"
    )


def _carve(work: ScalarField, source: ScalarField, flooded: ScalarField, moved, anchors,
           constraints: ConstraintSet) -> ScalarField:
    """Lower (raise) a path from each raised (lowered) anchor to the preserved minima (maxima)."""
    nx, ny, nz = work.dims
    vals = work.values.copy()
    fixed = np.zeros(work.n_vertices, dtype=bool)
    fixed[anchors] = True
    for descending in (False, True):
        ids = moved[(flooded.values[moved] < source.values[moved]) == descending]
        if ids.size == 0:
            continue
        seeds = constraints.maxima if descending else constraints.minima
        pred = _kernels.flood_tree(work.order.order, work.order.rank, seeds, nx, ny, nz,
                                   work.edge_offsets, descending)
        for v in ids.tolist():
            level = np.nextafter(source.values[v], np.inf if descending else -np.inf)
            u = pred[v]
            while u >= 0:
                if not fixed[u]:
                    vals[u] = max(vals[u], level) if descending else min(vals[u], level)
                u = pred[u]
    return build_field(work.dims, vals, work.order.rank)


def simplify(field: ScalarField, constraints: ConstraintSet, max_iter: int = 64, anchors=None,
             tolerance: float | None = None, max_repairs: int = 8) -> ScalarField:
    """Return a field whose extrema are exactly ``constraints``.

    Values only move toward the level of the flood that swallows them; the
    output offsets are rebuilt from the flood order. ``anchors`` are vertices
    whose values should survive; if carving cannot keep them all in place, or
    moves some vertex by more than ``tolerance``, the plain flood result is
    returned.
    """
    n = field.n_vertices
    for ids in (constraints.minima, constraints.maxima):
        if ids.size and (ids[0] < 0 or ids[-1] >= n):
            raise ReconstructionError(f"constraint vertex out of range for {n} vertices")
    plain = _flood(field, constraints, max_iter)
    if anchors is None:
        return plain
    anchors = np.unique(np.asarray(anchors, dtype=np.int64))
    work, out = field, plain
    for _ in range(max_repairs):
        moved = anchors[out.values[anchors] != field.values[anchors]]
        if moved.size == 0:
            if out is not plain and tolerance is not None and np.abs(out.values - field.values).max() > tolerance:
                return plain
            return out
        work = _carve(work, field, out, moved, anchors, constraints)
        out = _flood(work, constraints, max_iter)
    return plain


def rebuild_offsets(field: ScalarField, constraints: ConstraintSet) -> ScalarField:
    """Resolve flat plateaus so extrema sit exactly at ``constraints``.

    Values must already be consistent with the constraints up to plateau
    ordering; only offsets change.
    """
    out = simplify(field, constraints)
    if not np.array_equal(out.values, field.values):
        moved = int(np.flatnonzero(out.values != field.values)[0])
        raise ReconstructionError(f"offsets alone cannot enforce constraints (vertex {moved} must move)")
    return out
