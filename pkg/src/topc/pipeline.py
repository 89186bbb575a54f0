"""Compression and decompression pipelines, plus the SQ-R baseline."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .codec import (
    EXTERNAL_CODECS,
    TYPE_MAX,
    TYPE_MIN,
    TYPE_SADDLE,
    TYPE_SADDLE2,
    TopologicalIndex,
    build_index,
    decode,
    encode,
    external_codec_for,
    make_flags,
    sqr_partition,
)
from .field import ScalarField, build_field
from .persistence import PairClass, PersistenceDiagram, compute_diagram, filter_diagram
from .quantize import IntervalPartition, QuantizedField, build_partition, quantize
from .simplify import ConstraintSet, constraints_from_diagram, simplify

log = logging.getLogger(__name__)


def resolve_epsilon(field: ScalarField, epsilon) -> float:
    """Absolute threshold from a number or a ``"<pct>%"`` string of the range."""
    if isinstance(epsilon, str):
        text = epsilon.strip()
        if text.endswith("%"):
            lo, hi = field.value_range
            eps = float(text[:-1]) / 100.0 * (hi - lo)
        else:
            eps = float(text)
    else:
        eps = float(epsilon)
    if not eps >= 0:
        raise ValueError(f"epsilon must be a non-negative number, got {epsilon!r}")
    return eps


def critical_entries(diagram: PersistenceDiagram, dim: int):
    """Distinct critical vertices of ``diagram`` with their 2-bit type codes."""
    saddle2 = TYPE_SADDLE2 if dim == 3 else TYPE_SADDLE
    roles = {}

    def put(v, t):
        prev = roles.get(v)
        # extremum roles win; a vertex acting as both kinds of saddle is kept as a 1-saddle
        if prev is None or t in (TYPE_MIN, TYPE_MAX) or (prev == TYPE_SADDLE2 and t == TYPE_SADDLE):
            roles[v] = t

    for p in diagram:
        if p.pair_class == PairClass.MIN_SADDLE:
            put(p.birth_vertex, TYPE_MIN)
            put(p.death_vertex, TYPE_SADDLE)
        elif p.pair_class == PairClass.SADDLE_MAX:
            put(p.birth_vertex, saddle2)
            put(p.death_vertex, TYPE_MAX)
        else:
            put(p.birth_vertex, TYPE_MIN)
            put(p.death_vertex, TYPE_MAX)
    vids = np.array(sorted(roles), dtype=np.int64)
    types = np.array([roles[v] for v in vids.tolist()], dtype=np.uint8)
    return vids, types


def saddle_vertices(diagram: PersistenceDiagram) -> np.ndarray:
    cls = diagram.pair_class
    return np.concatenate([diagram.death_vertex[cls == PairClass.MIN_SADDLE],
                           diagram.birth_vertex[cls == PairClass.SADDLE_MAX]])


@dataclass(frozen=True, eq=False)
class CompressionReport:
    epsilon: float
    diagram: PersistenceDiagram
    kept: PersistenceDiagram
    removed: PersistenceDiagram
    simplified: ScalarField
    target: PersistenceDiagram
    quantized: QuantizedField
    index: TopologicalIndex
    exact: bool
    archive: bytes

    @property
    def compression_rate(self) -> float:
        return self.simplified.n_vertices * 8 / len(self.archive)


def compress_with_report(field: ScalarField, epsilon, *, pointwise: bool = False, external: str | None = None,
                         backend: str = "bz2", skip_simplification: bool = False,
                         source_f32: bool = False) -> CompressionReport:
    eps = resolve_epsilon(field, epsilon)
    if pointwise and eps <= 0:
        raise ValueError("pointwise control needs epsilon > 0")
    if external is not None and external not in EXTERNAL_CODECS:
        raise ValueError(f"unknown external codec {external!r}; available: {sorted(EXTERNAL_CODECS)}")
    diagram = compute_diagram(field)
    kept, removed = filter_diagram(diagram, eps)
    if skip_simplification:
        simplified, target = field, kept
    else:
        bound = float(removed.persistence.max()) if len(removed) else 0.0
        simplified = simplify(field, constraints_from_diagram(kept), anchors=saddle_vertices(kept), tolerance=bound)
        target = compute_diagram(simplified)
    exact = target.value_multiset() == kept.value_multiset()
    if not exact:
        log.warning("simplified diagram differs from the %d kept pairs (got %d); "
                    "archiving the simplified diagram", len(kept), len(target))
    partition = build_partition(target, pointwise, eps)
    vids, types = critical_entries(target, field.dim)
    quantized = quantize(simplified, partition, vids)
    index = build_index(vids, types, simplified.values[vids], simplified.order.rank[vids], quantized.partition)
    stream = EXTERNAL_CODECS[external].compress_field(field.values) if external else None
    flags = make_flags(pointwise=pointwise, external=stream is not None, backend=backend, source_f32=source_f32)
    archive = encode(quantized, index, eps, flags, stream)
    return CompressionReport(eps, diagram, kept, removed, simplified, target, quantized, index, exact, archive)


def compress(field: ScalarField, epsilon, **options) -> bytes:
    """Compress ``field`` preserving every persistence pair of persistence >= epsilon.

    ``epsilon`` is absolute, or a percentage of the value range given as a
    string such as ``"5%"``. Options: ``pointwise``, ``external`` (``"uq8"``),
    ``backend`` (``"bz2"``/``"zlib"``), ``skip_simplification``, ``source_f32``.
    """
    return compress_with_report(field, epsilon, **options).archive


def compress_skip_simplification(field: ScalarField, epsilon, **options) -> bytes:
    """Variant that quantizes ``field`` directly and simplifies only at decompression."""
    return compress(field, epsilon, skip_simplification=True, **options)


def crop_to_intervals(values, raw_intervals, partition: IntervalPartition, index: TopologicalIndex) -> np.ndarray:
    """Clamp each regular vertex into its interval; restore exact critical values."""
    out = np.array(values, dtype=np.float64, copy=True)
    reg = raw_intervals >= 0
    lo = partition.lower()[raw_intervals[reg]]
    hi = partition.upper()[raw_intervals[reg]]
    out[reg] = np.clip(out[reg], lo, hi)
    out[index.vertex_ids] = index.values
    return out


def _initial_offsets(values, raw, partition: IntervalPartition, index: TopologicalIndex) -> np.ndarray:
    """Offsets placing regular vertices on the right side of equal-valued critical vertices."""
    n = values.shape[0]
    slot = np.zeros(n, dtype=np.float64)
    slot[index.vertex_ids] = np.arange(len(index), dtype=np.float64)
    reg = np.flatnonzero(raw >= 0)
    x = values[reg]
    lo = partition.lower()[raw[reg]]
    hi = partition.upper()[raw[reg]]
    left = np.searchsorted(index.values, x, side="left")
    right = np.searchsorted(index.values, x, side="right")
    at_floor = (x == lo) & (lo < hi)
    point = lo == hi
    slot[reg] = np.where(at_floor, right, left) - 0.5
    slot[reg[point]] = left[point] + 0.5
    order = np.lexsort((np.arange(n), slot, values))
    offsets = np.empty(n, dtype=np.int64)
    offsets[order] = np.arange(n)
    return offsets


def decompress(data: bytes) -> ScalarField:
    """Decode an archive and reconstruct a field honouring its topological index."""
    quantized, index, header, external = decode(data)
    dims = header.dims
    values = quantized.values()
    if header.sqr:
        return build_field(dims, values)
    raw = quantized.raw_interval()
    if external is not None:
        approx = external_codec_for(external).decompress_field(external, dims)
        values = crop_to_intervals(approx, raw, quantized.partition, index)
    offsets = _initial_offsets(values, raw, quantized.partition, index)
    staged = build_field(dims, values, offsets)
    saddles = index.vertex_ids[(index.types == TYPE_SADDLE) | (index.types == TYPE_SADDLE2)]
    g = simplify(staged, ConstraintSet(index.minima(), index.maxima()), anchors=saddles)
    if external is None:
        g = settle_ties(snap_to_mids(g, quantized.partition, index), quantized.partition, index)
    return g


def snap_to_mids(field: ScalarField, partition: IntervalPartition, index: TopologicalIndex) -> ScalarField:
    """Send regular values lying strictly inside an interval to its mid-value.

    Carving at decompression leaves values just past a critical value. The
    map is monotone and keeps the rank order, so the diagram is unchanged.
    """
    bounds = partition.bounds
    if bounds.size < 2:
        return field
    values = field.values
    reg = np.ones(field.n_vertices, dtype=bool)
    reg[index.vertex_ids] = False
    k = np.searchsorted(bounds, values, side="right") - 1
    inside = reg & (k >= 0) & (k < bounds.size - 1) & (values != bounds[np.clip(k, 0, bounds.size - 1)])
    out = values.copy()
    out[inside] = partition.mids()[k[inside]]
    if np.array_equal(out, values):
        return field
    return build_field(field.dims, out, field.order.rank)


def settle_ties(field: ScalarField, partition: IntervalPartition, index: TopologicalIndex) -> ScalarField:
    """Move regular vertices flooded onto a critical value to the adjacent mid-value.

    Flooding can leave a regular vertex exactly on a critical value. It is
    moved to the mid-value of the interval on its side of that value in the
    total order, which is where quantizing an already simplified field puts
    it. Regular vertices lying between several critical vertices sharing the
    value are left alone. Rank order is unchanged, so the diagram is too.
    """
    values = field.values
    rank = field.order.rank
    reg = np.ones(field.n_vertices, dtype=bool)
    reg[index.vertex_ids] = False
    crit_vals, inv = np.unique(index.values, return_inverse=True)
    cr = rank[index.vertex_ids]
    lo_rank = np.full(crit_vals.size, np.iinfo(np.int64).max)
    hi_rank = np.full(crit_vals.size, -1)
    np.minimum.at(lo_rank, inv, cr)
    np.maximum.at(hi_rank, inv, cr)
    cand = np.flatnonzero(reg)
    pos = np.minimum(np.searchsorted(crit_vals, values[cand]), crit_vals.size - 1)
    on = crit_vals[pos] == values[cand]
    cand, pos = cand[on], pos[on]
    if cand.size == 0:
        return field
    bounds = partition.bounds
    mids = partition.mids()
    k = np.searchsorted(bounds, crit_vals[pos])
    below = (rank[cand] < lo_rank[pos]) & (k > 0)
    above = (rank[cand] > hi_rank[pos]) & (k < partition.n_raw) & (bounds.size > 1)
    out = values.copy()
    out[cand[below]] = mids[k[below] - 1]
    out[cand[above]] = mids[k[above]]
    if np.array_equal(out, values):
        return field
    return build_field(field.dims, out, rank)


def sq_r_compress(field: ScalarField, epsilon, *, backend: str = "bz2", source_f32: bool = False) -> bytes:
    """Baseline: uniform intervals of width epsilon, no topological control."""
    eps = resolve_epsilon(field, epsilon)
    if eps <= 0:
        raise ValueError("SQ-R needs epsilon > 0")
    lo, hi = field.value_range
    part = sqr_partition(lo, hi, eps)
    raw = np.clip(np.floor((field.values - lo) / eps).astype(np.int64), 0, part.n_raw - 1)
    nonempty = np.unique(raw)
    part = part.with_nonempty(nonempty)
    ids = part.compact_of_raw()[raw]
    q = QuantizedField(field.dims, ids, np.zeros(0, np.int64), np.zeros(0), part)
    return encode(q, None, eps, make_flags(backend=backend, source_f32=source_f32, sqr=True))


def sq_r_decompress(data: bytes) -> ScalarField:
    quantized, _, header, _ = decode(data)
    if not header.sqr:
        raise ValueError("not an SQ-R archive")
    return build_field(header.dims, quantized.values())
