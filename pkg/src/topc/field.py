"""Scalar fields on implicitly triangulated regular grids."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import FieldError


class CriticalType(enum.IntEnum):
    REGULAR = 0
    MINIMUM = 1
    SADDLE1 = 2
    SADDLE2 = 3
    MAXIMUM = 4
    DEGENERATE = 5


@dataclass(frozen=True)
class VertexOrder:
    """Total order on vertices induced by (value, offset).

    ``order[r]`` is the vertex at position ``r``; ``rank`` is its inverse.
    """

    order: np.ndarray
    rank: np.ndarray


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Per-vertex values on an ``nx * ny * nz`` grid, stored row-major.

    ``offsets`` is an injective integer labelling used to break ties between
    equal values (simulation of simplicity). ``nz == 1`` means a 2D field.
    """

    dims: tuple[int, int, int]
    values: np.ndarray
    offsets: np.ndarray

    @property
    def n_vertices(self) -> int:
        return int(self.values.shape[0])

    @property
    def dim(self) -> int:
        return 2 if self.dims[2] == 1 else 3

    @property
    def value_range(self) -> tuple[float, float]:
        return float(self.values.min()), float(self.values.max())

    @cached_property
    def order(self) -> VertexOrder:
        order = np.lexsort((self.offsets, self.values))
        rank = np.empty_like(order)
        rank[order] = np.arange(order.shape[0])
        return VertexOrder(order, rank)

    @cached_property
    def edge_offsets(self) -> np.ndarray:
        return _kernels.edge_offsets(self.dim)

    def grid(self) -> np.ndarray:
        """Values reshaped to ``(nz, ny, nx)``."""
        nx, ny, nz = self.dims
        return self.values.reshape(nz, ny, nx)

    def with_values(self, values, offsets=None) -> "ScalarField":
        return build_field(self.dims, values, self.offsets if offsets is None else offsets)


def _normalize_dims(dims) -> tuple[int, int, int]:
    dims = tuple(int(d) for d in dims)
    if len(dims) == 2:
        dims = dims + (1,)
    if len(dims) != 3:
        raise FieldError(f"expected 2 or 3 dimensions, got {len(dims)}")
    nx, ny, nz = dims
    if nx < 2 or ny < 2 or nz < 1:
        raise FieldError(f"grid {dims} admits no triangulation; need nx, ny >= 2")
    return dims


def build_field(dims, values, offsets=None) -> ScalarField:
    """Validate and wrap raw values into a :class:`ScalarField`.

    ``values`` may be flat (x fastest) or shaped ``(nz, ny, nx)``. Missing
    offsets default to the memory position of each vertex.
    """
    dims = _normalize_dims(dims)
    n = dims[0] * dims[1] * dims[2]
    vals = np.ascontiguousarray(values, dtype=np.float64).ravel()
    if vals.shape[0] != n:
        raise FieldError(f"length mismatch: dims {dims} need {n} values, got {vals.shape[0]}")
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        raise FieldError(f"non-finite value at vertex {int(bad[0])}")
    if offsets is None:
        offs = np.arange(n, dtype=np.int64)
    else:
        offs = np.ascontiguousarray(offsets, dtype=np.int64).ravel()
        if offs.shape[0] != n:
            raise FieldError(f"offsets length {offs.shape[0]} does not match {n} vertices")
        seen = np.zeros(n, dtype=bool)
        inside = (offs >= 0) & (offs < n)
        seen[offs[inside]] = True
        if not inside.all() or not seen.all():
            raise FieldError("offsets must be a permutation of 0..n_v-1")
    vals.setflags(write=False)
    offs.setflags(write=False)
    return ScalarField(dims, vals, offs)


def _check_vertex(field: ScalarField, v: int) -> int:
    v = int(v)
    if not 0 <= v < field.n_vertices:
        raise FieldError(f"vertex {v} out of range [0, {field.n_vertices})")
    return v


def link_neighbors(field: ScalarField, v: int) -> list[int]:
    """Vertices sharing an edge with ``v``, truncated at the grid boundary."""
    v = _check_vertex(field, v)
    nx, ny, nz = field.dims
    offs = field.edge_offsets
    out = []
    for i in range(offs.shape[0]):
        u = _kernels._neighbor(v, i, nx, ny, nz, offs)
        if u >= 0:
            out.append(int(u))
    return sorted(out)


def _classify(low, up, dim):
    if low == 0:
        return CriticalType.MINIMUM
    if up == 0:
        return CriticalType.MAXIMUM
    if low > 2 or up > 2:
        return CriticalType.DEGENERATE
    if dim == 2:
        if low == 2 or up == 2:
            return CriticalType.SADDLE1
        return CriticalType.REGULAR
    if low == 2 and up == 2:
        return CriticalType.DEGENERATE
    if low == 2:
        return CriticalType.SADDLE1
    if up == 2:
        return CriticalType.SADDLE2
    return CriticalType.REGULAR


def link_component_counts(field: ScalarField, order: VertexOrder | None = None):
    """Per-vertex number of lower and upper link components."""
    order = field.order if order is None else order
    nx, ny, nz = field.dims
    offs = field.edge_offsets
    return _kernels.link_components(order.rank, nx, ny, nz, offs, _kernels.link_edges(offs))


def classify_vertex(field: ScalarField, order: VertexOrder | None, v: int) -> CriticalType:
    v = _check_vertex(field, v)
    order = field.order if order is None else order
    rank = order.rank
    offs = field.edge_offsets
    nx, ny, nz = field.dims
    side = {}
    for i in range(offs.shape[0]):
        u = _kernels._neighbor(v, i, nx, ny, nz, offs)
        if u >= 0:
            side[i] = -1 if rank[u] < rank[v] else 1
    parent = {i: i for i in side}

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i

    for a, b in _kernels.link_edges(offs):
        if a in side and b in side and side[a] == side[b]:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    roots = [i for i in side if find(i) == i]
    low = sum(1 for i in roots if side[i] < 0)
    up = len(roots) - low
    return _classify(low, up, field.dim)


def classify_all(field: ScalarField, order: VertexOrder | None = None) -> np.ndarray:
    """Vectorized :func:`classify_vertex` over every vertex (int codes)."""
    low, up = link_component_counts(field, order)
    out = np.full(field.n_vertices, CriticalType.REGULAR, dtype=np.int8)
    is_min = low == 0
    is_max = (up == 0) & ~is_min
    rest = ~is_min & ~is_max
    degen = rest & ((low > 2) | (up > 2))
    if field.dim == 2:
        sad = rest & ~degen & ((low == 2) | (up == 2))
        out[sad] = CriticalType.SADDLE1
    else:
        both = rest & ~degen & (low == 2) & (up == 2)
        degen |= both
        out[rest & ~degen & (low == 2)] = CriticalType.SADDLE1
        out[rest & ~degen & (up == 2)] = CriticalType.SADDLE2
    out[degen] = CriticalType.DEGENERATE
    out[is_min] = CriticalType.MINIMUM
    out[is_max] = CriticalType.MAXIMUM
    return out
