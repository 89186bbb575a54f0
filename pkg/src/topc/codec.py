"""Bit-exact archive format.

Layout (all little-endian)::

    fixed header (16 bytes, never compressed)
        magic     4s   b"TOPC"
        version   u8
        flags     u8   bit0 pointwise, bit1 external stream, bit2 zlib backend
                       (else bz2), bit3 source was float32, bit4 SQ-R baseline
        reserved  u16  zero
        raw_len   u32  payload size before the lossless backend
        comp_len  u32  payload size after the lossless backend
    payload (comp_len bytes, lossless backend applied)
        dims      3 x u32
        epsilon   f64  absolute
        n_c       u32  critical vertices in the index
        n_i       u32  non-empty intervals
        index     vertex ids   n_c words of ceil(log2 n_v) bits
                  types        n_c words of 2 bits
                  values       n_c x f64
                  links        n_c words of bit_length(n_i) bits (n_i = none)
                  [pointwise]  n_raw u32 + n_raw-bit occupancy map
        [SQ-R instead of index] origin f64, n_raw u32, n_raw-bit occupancy map
        ids       n_v words of ceil(log2 max(n_i, 2)) bits
        [external] u64 length + bytes
    crc32 (u32) of the payload before the backend

Every packed block is padded to a byte boundary. Words are packed LSB first.
"""

from __future__ import annotations

import bz2
import math
import struct
import zlib
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    ArchiveError,
    BackendError,
    BadMagic,
    ChecksumMismatch,
    EncodingError,
    TruncatedArchive,
    UnsupportedVersion,
)
from .quantize import IntervalPartition, QuantizedField, partition_from_values

MAGIC = b"TOPC"
VERSION = 1
FIXED_HEADER = struct.Struct("<4sBBHII")

FLAG_POINTWISE = 0x01
FLAG_EXTERNAL = 0x02
FLAG_BACKEND_ZLIB = 0x04
FLAG_SOURCE_F32 = 0x08
FLAG_SQR = 0x10

TYPE_MIN, TYPE_SADDLE, TYPE_SADDLE2, TYPE_MAX = 0, 1, 2, 3

BACKENDS = ("bz2", "zlib")


def make_flags(*, pointwise=False, external=False, backend="bz2", source_f32=False, sqr=False) -> int:
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    return (
        (FLAG_POINTWISE if pointwise else 0)
        | (FLAG_EXTERNAL if external else 0)
        | (FLAG_BACKEND_ZLIB if backend == "zlib" else 0)
        | (FLAG_SOURCE_F32 if source_f32 else 0)
        | (FLAG_SQR if sqr else 0)
    )


# -- bit packing -------------------------------------------------------------

def id_width(n_intervals: int) -> int:
    """Bits per interval id: ceil(log2(max(n_i, 2)))."""
    return (max(n_intervals, 2) - 1).bit_length()


def vertex_width(n_vertices: int) -> int:
    return max(1, (n_vertices - 1).bit_length())


def link_width(n_intervals: int) -> int:
    return max(1, int(n_intervals).bit_length())


def packed_size(count: int, width: int) -> int:
    return (count * width + 7) // 8


def pack_words(words, width: int) -> bytes:
    words = np.asarray(words, dtype=np.uint64)
    if words.size == 0:
        return b""
    if width < 64 and words.max(initial=0) >> np.uint64(width):
        raise EncodingError(f"value {int(words.max())} does not fit in {width} bits")
    shifts = np.arange(width, dtype=np.uint64)
    bits = ((words[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits.ravel(), bitorder="little").tobytes()


def unpack_words(buf: bytes, count: int, width: int) -> np.ndarray:
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8), count=count * width, bitorder="little")
    weights = np.uint64(1) << np.arange(width, dtype=np.uint64)
    return (bits.reshape(count, width).astype(np.uint64) @ weights).astype(np.int64)


# -- lossless backend --------------------------------------------------------

def lossless_pass(data: bytes, direction: str, backend: str = "bz2") -> bytes:
    """Compress (``direction="compress"``) or restore a byte stream."""
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    if direction not in ("compress", "decompress"):
        raise ValueError(f"direction must be 'compress' or 'decompress', got {direction!r}")
    if not data:
        return b""
    mod = bz2 if backend == "bz2" else zlib
    try:
        if direction == "compress":
            return mod.compress(data, 9)
        return mod.decompress(data)
    except (OSError, ValueError, EOFError, zlib.error) as exc:
        raise BackendError(f"{backend} failed to {direction}: {exc}") from exc


# -- external lossy codec ----------------------------------------------------

class UniformQuantizer8:
    """Stand-in third-party compressor: 8-bit uniform quantization.

    The global range is cut into 256 equal cells; each value is replaced by
    its cell centre, so the error is at most range / 512.
    """

    name = "uq8"
    tag = b"UQ8\x00"
    _head = struct.Struct("<4sddQ")

    def compress_field(self, values) -> bytes:
        vals = np.asarray(values, dtype=np.float64).ravel()
        lo, hi = float(vals.min()), float(vals.max())
        if hi > lo:
            codes = np.floor((vals - lo) / (hi - lo) * 256.0)
            codes = np.clip(codes, 0, 255).astype(np.uint8)
        else:
            codes = np.zeros(vals.size, dtype=np.uint8)
        return self._head.pack(self.tag, lo, hi, vals.size) + codes.tobytes()

    def decompress_field(self, data: bytes, dims) -> np.ndarray:
        n = int(np.prod(dims))
        tag, lo, hi, count = self._head.unpack_from(data)
        if tag != self.tag:
            raise ArchiveError(f"external stream is not {self.name}")
        if count != n or len(data) != self._head.size + n:
            raise ArchiveError(f"external stream holds {count} values, dims {tuple(dims)} need {n}")
        codes = np.frombuffer(data, dtype=np.uint8, offset=self._head.size).astype(np.float64)
        if hi == lo:
            return np.full(n, lo)
        return np.clip(lo + (codes + 0.5) * ((hi - lo) / 256.0), lo, hi)


EXTERNAL_CODECS = {UniformQuantizer8.name: UniformQuantizer8()}


def external_codec_for(data: bytes):
    for codec in EXTERNAL_CODECS.values():
        if data[:4] == codec.tag:
            return codec
    raise ArchiveError("unknown external stream")


# -- topological index -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TopologicalIndex:
    """Critical vertices in (value, order) order with their types and links.

    ``links[k]`` is the compact id of the non-empty interval whose lower
    bound is ``values[k]``, or -1 when that interval is empty or absent.
    """

    vertex_ids: np.ndarray
    types: np.ndarray
    values: np.ndarray
    links: np.ndarray

    def __len__(self):
        return int(self.vertex_ids.shape[0])

    def minima(self) -> np.ndarray:
        return self.vertex_ids[self.types == TYPE_MIN]

    def maxima(self) -> np.ndarray:
        return self.vertex_ids[self.types == TYPE_MAX]

    def same_as(self, other: "TopologicalIndex") -> bool:
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("vertex_ids", "types", "values", "links")
        )


def interval_links(values, partition: IntervalPartition) -> np.ndarray:
    raw = np.searchsorted(partition.bounds, values)
    compact = partition.compact_of_raw()
    ok = raw < partition.n_raw
    out = np.full(len(values), -1, dtype=np.int64)
    out[ok] = compact[raw[ok]]
    return out


def build_index(vertex_ids, types, values, order_key, partition: IntervalPartition) -> TopologicalIndex:
    """Index entries sorted by value, ties by ``order_key`` (vertex rank)."""
    vertex_ids = np.asarray(vertex_ids, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    perm = np.lexsort((np.asarray(order_key), values))
    vids, vals = vertex_ids[perm], values[perm]
    return TopologicalIndex(vids, np.asarray(types, dtype=np.uint8)[perm], vals, interval_links(vals, partition))


# -- archive -----------------------------------------------------------------

@dataclass(frozen=True)
class Header:
    version: int
    flags: int
    dims: tuple[int, int, int]
    epsilon: float
    n_c: int
    n_i: int
    payload_bytes: int
    archive_bytes: int

    @property
    def pointwise(self) -> bool:
        return bool(self.flags & FLAG_POINTWISE)

    @property
    def external(self) -> bool:
        return bool(self.flags & FLAG_EXTERNAL)

    @property
    def backend(self) -> str:
        return "zlib" if self.flags & FLAG_BACKEND_ZLIB else "bz2"

    @property
    def sqr(self) -> bool:
        return bool(self.flags & FLAG_SQR)

    @property
    def n_vertices(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]

    @property
    def source_bytes(self) -> int:
        return self.n_vertices * (4 if self.flags & FLAG_SOURCE_F32 else 8)

    @property
    def compression_rate(self) -> float:
        return self.source_bytes / self.archive_bytes


def payload_size(n_v, n_c, n_i, *, n_raw=None, external_len=None, sqr=False) -> int:
    """Exact payload size in bytes before the lossless backend."""
    size = 12 + 8 + 4 + 4
    if sqr:
        size += 8 + 4 + packed_size(n_raw, 1)
    else:
        size += packed_size(n_c, vertex_width(n_v)) + packed_size(n_c, 2) + 8 * n_c
        size += packed_size(n_c, link_width(n_i))
        if n_raw is not None:
            size += 4 + packed_size(n_raw, 1)
    size += packed_size(n_v, id_width(n_i))
    if external_len is not None:
        size += 8 + external_len
    return size


def payload_bits(n_v, n_c, n_i) -> int:
    """Bit count of ids + vertex positions + types + values, unpadded."""
    return n_v * id_width(n_i) + n_c * (vertex_width(n_v) + 2 + 64)


def _occupancy(partition: IntervalPartition) -> bytes:
    bits = np.zeros(partition.n_raw, dtype=np.uint64)
    bits[partition.nonempty] = 1
    return pack_words(bits, 1)


def encode(quantized: QuantizedField, index: TopologicalIndex | None, epsilon: float,
           flags: int = 0, external_stream: bytes | None = None) -> bytes:
    """Serialize a quantized field into an archive."""
    n_v = quantized.n_vertices
    part = quantized.partition
    n_i = part.n_intervals
    sqr = bool(flags & FLAG_SQR)
    if bool(flags & FLAG_EXTERNAL) != (external_stream is not None):
        raise EncodingError("external flag and external stream disagree")
    if n_i == 0 and quantized.regular_mask().any():
        raise EncodingError("no non-empty interval but regular vertices exist")
    if sqr:
        n_c = 0
    else:
        if index is None:
            raise EncodingError("index required")
        n_c = len(index)
        if not np.array_equal(np.sort(index.vertex_ids), quantized.critical_vertices):
            raise EncodingError("index and quantized field disagree on the critical vertex set")
        if quantized.critical_vertices.size and not np.array_equal(
            quantized.critical_values[np.searchsorted(quantized.critical_vertices, index.vertex_ids)],
            index.values,
        ):
            raise EncodingError("index values differ from quantized critical values")
        base = partition_from_values(index.values, bool(flags & FLAG_POINTWISE), epsilon) if n_c else None
        if base is None or not np.array_equal(base.bounds, part.bounds):
            raise EncodingError("partition bounds cannot be rebuilt from the index values and flags")
    parts = [struct.pack("<3IdII", *quantized.dims, float(epsilon), n_c, n_i)]
    if sqr:
        parts.append(struct.pack("<dI", float(part.bounds[0]), part.n_raw))
        parts.append(_occupancy(part))
    else:
        links = np.where(index.links < 0, n_i, index.links)
        parts.append(pack_words(index.vertex_ids, vertex_width(n_v)))
        parts.append(pack_words(index.types, 2))
        parts.append(np.asarray(index.values, dtype="<f8").tobytes())
        parts.append(pack_words(links, link_width(n_i)))
        if flags & FLAG_POINTWISE:
            parts.append(struct.pack("<I", part.n_raw))
            parts.append(_occupancy(part))
    parts.append(pack_words(quantized.interval_id, id_width(n_i)))
    if external_stream is not None:
        parts.append(struct.pack("<Q", len(external_stream)))
        parts.append(external_stream)
    payload = b"".join(parts)
    backend = "zlib" if flags & FLAG_BACKEND_ZLIB else "bz2"
    comp = lossless_pass(payload, "compress", backend)
    head = FIXED_HEADER.pack(MAGIC, VERSION, flags, 0, len(payload), len(comp))
    return head + comp + struct.pack("<I", zlib.crc32(payload))


def read_fixed_header(data: bytes):
    """(version, flags, raw_len, comp_len) from the first 16 bytes only."""
    if len(data) < FIXED_HEADER.size:
        raise TruncatedArchive(f"archive shorter than the {FIXED_HEADER.size}-byte header")
    magic, version, flags, _, raw_len, comp_len = FIXED_HEADER.unpack_from(data[:FIXED_HEADER.size])
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"archive version {version}, reader supports {VERSION}")
    return version, flags, raw_len, comp_len


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ArchiveError("payload ends early")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))

    def words(self, count: int, width: int) -> np.ndarray:
        return unpack_words(self.take(packed_size(count, width)), count, width)


def _sqr_bounds(origin: float, epsilon: float, n_raw: int) -> np.ndarray:
    return origin + epsilon * np.arange(n_raw + 1, dtype=np.float64)


class Decoded(NamedTuple):
    quantized: QuantizedField
    index: TopologicalIndex | None
    header: Header
    external: bytes | None


def decode(data: bytes) -> Decoded:
    """Inverse of :func:`encode`. ``index`` is None for SQ-R archives."""
    version, flags, raw_len, comp_len = read_fixed_header(data)
    end = FIXED_HEADER.size + comp_len
    if len(data) < end + 4:
        raise TruncatedArchive(f"archive has {len(data)} bytes, header announces {end + 4}")
    if len(data) > end + 4:
        raise ArchiveError(f"{len(data) - end - 4} bytes after the checksum")
    backend = "zlib" if flags & FLAG_BACKEND_ZLIB else "bz2"
    payload = lossless_pass(data[FIXED_HEADER.size:end], "decompress", backend)
    (crc,) = struct.unpack_from("<I", data, end)
    if len(payload) != raw_len or zlib.crc32(payload) != crc:
        raise ChecksumMismatch("payload checksum mismatch")
    r = _Reader(payload)
    nx, ny, nz, epsilon, n_c, n_i = r.unpack("<3IdII")
    dims = (nx, ny, nz)
    n_v = nx * ny * nz
    index = None
    if flags & FLAG_SQR:
        origin, n_raw = r.unpack("<dI")
        occ = r.words(n_raw, 1)
        part = IntervalPartition(_sqr_bounds(origin, epsilon, n_raw), np.flatnonzero(occ))
        crit = np.zeros(0, dtype=np.int64)
        crit_vals = np.zeros(0)
    else:
        vids = r.words(n_c, vertex_width(n_v))
        types = r.words(n_c, 2).astype(np.uint8)
        vals = np.frombuffer(r.take(8 * n_c), dtype="<f8").astype(np.float64)
        links = r.words(n_c, link_width(n_i))
        links = np.where(links == n_i, -1, links)
        index = TopologicalIndex(vids, types, vals, links)
        base = partition_from_values(vals, bool(flags & FLAG_POINTWISE), epsilon)
        if flags & FLAG_POINTWISE:
            (n_raw,) = r.unpack("<I")
            if n_raw != base.n_raw:
                raise ArchiveError(f"occupancy map covers {n_raw} intervals, partition has {base.n_raw}")
            nonempty = np.flatnonzero(r.words(n_raw, 1))
        else:
            raw = np.searchsorted(base.bounds, vals)
            linked = links >= 0
            pairs = sorted(set(zip(raw[linked].tolist(), links[linked].tolist())))
            nonempty = np.array([p[0] for p in pairs], dtype=np.int64)
            if [p[1] for p in pairs] != list(range(len(pairs))):
                raise ArchiveError("interval links are inconsistent")
        part = base.with_nonempty(nonempty)
        if part.n_intervals != n_i:
            raise ArchiveError(f"header announces {n_i} intervals, index yields {part.n_intervals}")
        order = np.argsort(vids, kind="stable")
        crit, crit_vals = vids[order], vals[order]
    ids = r.words(n_v, id_width(n_i))
    external = None
    if flags & FLAG_EXTERNAL:
        (length,) = r.unpack("<Q")
        external = r.take(length)
    if r.pos != len(payload):
        raise ArchiveError(f"{len(payload) - r.pos} trailing payload bytes")
    quantized = QuantizedField(dims, ids, crit, crit_vals, part)
    header = Header(version, flags, dims, epsilon, n_c, n_i, raw_len, len(data))
    return Decoded(quantized, index, header, external)


def sqr_partition(lo: float, hi: float, epsilon: float) -> IntervalPartition:
    n_raw = max(1, math.ceil((hi - lo) / epsilon))
    return IntervalPartition(_sqr_bounds(lo, epsilon, n_raw))
