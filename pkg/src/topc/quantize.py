"""Topologically adaptive quantization of the range."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .field import ScalarField
from .persistence import PersistenceDiagram, compute_diagram


@dataclass(frozen=True, eq=False)
class IntervalPartition:
    """Contiguous intervals ``[bounds[i], bounds[i+1]]`` covering the range.

    ``nonempty`` lists, in increasing order, the raw indices of intervals
    that received at least one regular vertex; compact ids index into it.
    """

    bounds: np.ndarray
    nonempty: np.ndarray = dc_field(default=None)

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=np.float64)
        if b.ndim != 1 or b.size < 1 or np.any(np.diff(b) <= 0):
            raise ValueError("bounds must be a non-empty strictly increasing sequence")
        object.__setattr__(self, "bounds", b)
        ne = np.arange(self.n_raw) if self.nonempty is None else np.asarray(self.nonempty, np.int64)
        object.__setattr__(self, "nonempty", ne)

    @property
    def n_raw(self) -> int:
        # a single bound (constant field) still yields one, zero-width interval
        return max(int(self.bounds.size) - 1, 1)

    def lower(self) -> np.ndarray:
        return self.bounds[:-1] if self.bounds.size > 1 else self.bounds.copy()

    def upper(self) -> np.ndarray:
        return self.bounds[1:] if self.bounds.size > 1 else self.bounds.copy()

    @property
    def n_intervals(self) -> int:
        """Number of non-empty intervals (``n_i``)."""
        return int(self.nonempty.size)

    def compact_of_raw(self) -> np.ndarray:
        out = np.full(self.n_raw, -1, dtype=np.int64)
        out[self.nonempty] = np.arange(self.nonempty.size)
        return out

    def mids(self) -> np.ndarray:
        return 0.5 * (self.lower() + self.upper())

    def with_nonempty(self, nonempty) -> "IntervalPartition":
        return IntervalPartition(self.bounds, nonempty)

    def same_as(self, other: "IntervalPartition") -> bool:
        return np.array_equal(self.bounds, other.bounds) and np.array_equal(self.nonempty, other.nonempty)


def subdivide(values, width: float) -> np.ndarray:
    """Sorted unique ``values`` with every gap wider than ``width`` split evenly."""
    vals = np.unique(np.asarray(values, dtype=np.float64))
    out = [vals[:1]]
    for a, b in zip(vals[:-1], vals[1:]):
        k = math.ceil((b - a) / width)
        if k > 1:
            out.append(a + (b - a) * np.arange(1, k) / k)
        out.append(np.array([b]))
    return np.unique(np.concatenate(out))


def partition_from_values(critical_values, pointwise: bool = False, epsilon: float = 0.0) -> IntervalPartition:
    if pointwise:
        if not epsilon > 0:
            raise ValueError(f"pointwise control needs epsilon > 0, got {epsilon}")
        return IntervalPartition(subdivide(critical_values, epsilon))
    return IntervalPartition(np.unique(np.asarray(critical_values, dtype=np.float64)))


def build_partition(diagram: PersistenceDiagram, pointwise: bool = False, epsilon: float = 0.0) -> IntervalPartition:
    """Partition delimited by every critical value in ``diagram``.

    With ``pointwise``, gaps wider than ``epsilon`` are cut into
    ``ceil(gap / epsilon)`` equal sub-intervals.
    """
    if len(diagram) == 0:
        raise ValueError("empty diagram")
    vals = np.concatenate([diagram.birth_value, diagram.death_value])
    return partition_from_values(vals, pointwise, epsilon)


@dataclass(frozen=True, eq=False)
class QuantizedField:
    """Interval assignment of regular vertices plus exact critical values.

    ``interval_id`` holds compact ids; entries at critical vertices are 0
    and carry no meaning.
    """

    dims: tuple[int, int, int]
    interval_id: np.ndarray
    critical_vertices: np.ndarray
    critical_values: np.ndarray
    partition: IntervalPartition

    @property
    def n_vertices(self) -> int:
        return int(self.interval_id.shape[0])

    def regular_mask(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.critical_vertices] = False
        return mask

    def raw_interval(self) -> np.ndarray:
        """Raw interval index per vertex (-1 at critical vertices)."""
        if self.partition.n_intervals:
            raw = self.partition.nonempty[self.interval_id]
        else:
            raw = np.zeros_like(self.interval_id)
        raw[self.critical_vertices] = -1
        return raw

    def values(self) -> np.ndarray:
        """Mid-values at regular vertices, exact values at critical ones."""
        out = np.empty(self.n_vertices, dtype=np.float64)
        reg = self.regular_mask()
        if reg.any():
            out[reg] = self.partition.mids()[self.partition.nonempty[self.interval_id[reg]]]
        out[self.critical_vertices] = self.critical_values
        return out

    def same_as(self, other: "QuantizedField") -> bool:
        return (
            tuple(self.dims) == tuple(other.dims)
            and np.array_equal(self.interval_id, other.interval_id)
            and np.array_equal(self.critical_vertices, other.critical_vertices)
            and np.array_equal(self.critical_values, other.critical_values)
            and self.partition.same_as(other.partition)
        )


def assign_intervals(values, rank, critical_vertices, bounds) -> np.ndarray:
    """Raw interval index for every vertex.

    A value lying exactly on a critical bound goes below it when the vertex
    precedes every critical vertex of that value in the total order, above
    it otherwise. Values on a non-critical bound go above.
    """
    bounds = np.asarray(bounds, dtype=np.float64)
    n_raw = max(bounds.size - 1, 1)
    raw = np.searchsorted(bounds, values, side="right") - 1
    crit_vals = values[critical_vertices]
    ucv, inv = np.unique(crit_vals, return_inverse=True)
    lowest = np.full(ucv.size, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(lowest, inv, rank[critical_vertices])
    pos = np.searchsorted(ucv, values)
    pos_c = np.minimum(pos, ucv.size - 1)
    on_crit = ucv[pos_c] == values
    below = on_crit & (rank < lowest[pos_c])
    raw[below] -= 1
    return np.clip(raw, 0, n_raw - 1)


def quantize(field: ScalarField, partition: IntervalPartition, critical_vertices=None) -> QuantizedField:
    """Map regular vertices of ``field`` to the interval containing them.

    ``critical_vertices`` defaults to the vertices of the diagram of ``field``.
    """
    if critical_vertices is None:
        critical_vertices = compute_diagram(field).critical_vertices()
    crit = np.unique(np.asarray(critical_vertices, dtype=np.int64))
    vals = field.values
    lo, hi = partition.bounds[0], partition.bounds[-1]
    if vals.min() < lo or vals.max() > hi:
        raise ValueError(f"field range [{vals.min()}, {vals.max()}] exceeds partition [{lo}, {hi}]")
    raw = assign_intervals(vals, field.order.rank, crit, partition.bounds)
    reg = np.ones(field.n_vertices, dtype=bool)
    reg[crit] = False
    nonempty = np.unique(raw[reg])
    part = partition.with_nonempty(nonempty)
    ids = np.zeros(field.n_vertices, dtype=np.int64)
    if nonempty.size:
        ids[reg] = part.compact_of_raw()[raw[reg]]
    return QuantizedField(field.dims, ids, crit, vals[crit].copy(), part)
