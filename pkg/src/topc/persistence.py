"""Persistence diagrams of (0, 1) and (d-1, d) critical point pairs."""

from __future__ import annotations

import csv
import enum
import io
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import _kernels
from .field import ScalarField


class PairClass(enum.IntEnum):
    MIN_SADDLE = 0
    SADDLE_MAX = 1
    ESSENTIAL = 2


_CLASS_NAMES = {
    PairClass.MIN_SADDLE: "min-saddle",
    PairClass.SADDLE_MAX: "saddle-max",
    PairClass.ESSENTIAL: "essential",
}


@dataclass(frozen=True)
class PersistencePair:
    birth_vertex: int
    death_vertex: int
    birth_value: float
    death_value: float
    pair_class: PairClass

    @property
    def persistence(self) -> float:
        return self.death_value - self.birth_value


@dataclass(frozen=True, eq=False)
class PersistenceDiagram:
    """Column-oriented set of persistence pairs.

    Pairs are stored as parallel arrays; iterate to get
    :class:`PersistencePair` objects.
    """

    birth_vertex: np.ndarray
    death_vertex: np.ndarray
    birth_value: np.ndarray
    death_value: np.ndarray
    pair_class: np.ndarray
    field_range: tuple[float, float]

    def __len__(self):
        return int(self.birth_vertex.shape[0])

    def __iter__(self):
        for i in range(len(self)):
            yield PersistencePair(
                int(self.birth_vertex[i]),
                int(self.death_vertex[i]),
                float(self.birth_value[i]),
                float(self.death_value[i]),
                PairClass(int(self.pair_class[i])),
            )

    @property
    def persistence(self) -> np.ndarray:
        return self.death_value - self.birth_value

    def subset(self, mask) -> "PersistenceDiagram":
        return PersistenceDiagram(
            self.birth_vertex[mask],
            self.death_vertex[mask],
            self.birth_value[mask],
            self.death_value[mask],
            self.pair_class[mask],
            self.field_range,
        )

    def of_class(self, cls: PairClass) -> "PersistenceDiagram":
        return self.subset(self.pair_class == cls)

    def essential(self) -> PersistencePair:
        (idx,) = np.flatnonzero(self.pair_class == PairClass.ESSENTIAL)
        return list(self.subset([idx]))[0]

    def value_multiset(self) -> Counter:
        """Multiset of (class, birth, death) used for exact comparisons."""
        return Counter(
            zip(self.pair_class.tolist(), self.birth_value.tolist(), self.death_value.tolist())
        )

    def critical_vertices(self) -> np.ndarray:
        return np.unique(np.concatenate([self.birth_vertex, self.death_vertex]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["birth_vertex", "death_vertex", "birth_value", "death_value", "persistence", "class"])
        for p in self:
            w.writerow([
                p.birth_vertex,
                p.death_vertex,
                repr(p.birth_value),
                repr(p.death_value),
                repr(p.persistence),
                _CLASS_NAMES[p.pair_class],
            ])
        return buf.getvalue()


def _assemble(field, order, min_pairs, max_pairs) -> PersistenceDiagram:
    vals = field.values
    mb, md = min_pairs
    # descending sweep reports (maximum, saddle)
    xm, xs = max_pairs
    gmin = int(order.order[0])
    gmax = int(order.order[-1])
    birth = np.concatenate([mb, xs, [gmin]]).astype(np.int64)
    death = np.concatenate([md, xm, [gmax]]).astype(np.int64)
    cls = np.concatenate([
        np.full(len(mb), PairClass.MIN_SADDLE, np.int8),
        np.full(len(xm), PairClass.SADDLE_MAX, np.int8),
        [PairClass.ESSENTIAL],
    ]).astype(np.int8)
    return PersistenceDiagram(birth, death, vals[birth], vals[death], cls, field.value_range)


def compute_diagram(field: ScalarField) -> PersistenceDiagram:
    """Min-saddle, saddle-max and essential pairs via union-find sweeps."""
    order = field.order
    nx, ny, nz = field.dims
    offs = field.edge_offsets
    n = field.n_vertices
    asc = _kernels.sweep_pairs(order.order, order.rank, nx, ny, nz, offs)
    desc = _kernels.sweep_pairs(order.order[::-1].copy(), n - 1 - order.rank, nx, ny, nz, offs)
    return _assemble(field, order, asc, desc)


ORACLE_LIMIT = 10_000


def _structure(offs):
    st = np.zeros((3, 3, 3), dtype=bool)
    st[1, 1, 1] = True
    for dx, dy, dz in offs:
        st[1 + dz, 1 + dy, 1 + dx] = True
    return st


def _flood_fill_sweep(field, sequence, position):
    """Component deaths along ``sequence``, tracked by relabelling the grid."""
    nx, ny, nz = field.dims
    offs = field.edge_offsets
    structure = _structure(offs)
    n = field.n_vertices
    added = np.zeros(n, dtype=bool)
    labels = np.zeros(n, dtype=np.int64)
    next_label = 1
    births, deaths = [], []
    for v in sequence:
        v = int(v)
        x, y, z = v % nx, (v // nx) % ny, v // (nx * ny)
        lower = []
        for dx, dy, dz in offs:
            xx, yy, zz = x + dx, y + dy, z + dz
            if 0 <= xx < nx and 0 <= yy < ny and 0 <= zz < nz:
                u = xx + nx * (yy + ny * zz)
                if added[u]:
                    lower.append(u)
        distinct = {int(labels[u]) for u in lower}
        added[v] = True
        if not lower:
            labels[v] = next_label
            next_label += 1
            continue
        if len(distinct) == 1:
            labels[v] = distinct.pop()
            continue
        # components meet at v: find each one's oldest vertex, then relabel
        comps = sorted(distinct)
        pos = position.astype(np.float64)
        oldest = ndimage.minimum_position(
            np.where(added, pos, np.inf).reshape(nz, ny, nx),
            labels.reshape(nz, ny, nx) * (labels.reshape(nz, ny, nx) > 0),
            comps,
        )
        ids = [int(p[2] + nx * (p[1] + ny * p[0])) for p in oldest]
        ids.sort(key=lambda u: position[u])
        for u in ids[1:]:
            births.append(u)
            deaths.append(v)
        lab, _ = ndimage.label(added.reshape(nz, ny, nx), structure=structure)
        labels = lab.ravel().astype(np.int64)
        next_label = int(labels.max()) + 1
    return np.array(births, dtype=np.int64), np.array(deaths, dtype=np.int64)


def brute_force_diagram(field: ScalarField) -> PersistenceDiagram:
    """Reference diagram built from explicit connected-component labelling.

    Independent of the union-find kernels: components of the sub-level
    (sur-level) set are recomputed by flood fill at every merge event.
    """
    if field.n_vertices > ORACLE_LIMIT:
        raise ValueError(f"oracle limited to {ORACLE_LIMIT} vertices, field has {field.n_vertices}")
    order = field.order
    n = field.n_vertices
    asc = _flood_fill_sweep(field, order.order, order.rank)
    desc = _flood_fill_sweep(field, order.order[::-1], n - 1 - order.rank)
    return _assemble(field, order, asc, desc)


def filter_diagram(diagram: PersistenceDiagram, epsilon: float):
    """Split into pairs to keep and pairs to remove at threshold ``epsilon``.

    A pair is removed iff its persistence is strictly below ``epsilon``; the
    essential pair is always kept.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}")
    keep = (diagram.persistence >= epsilon) | (diagram.pair_class == PairClass.ESSENTIAL)
    return diagram.subset(keep), diagram.subset(~keep)
