"""Lossy compression of regular-grid scalar fields with persistence-based topological control."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ArchiveError,
    BackendError,
    BadMagic,
    ChecksumMismatch,
    EncodingError,
    FieldError,
    ReconstructionError,
    TopcError,
    TruncatedArchive,
    UnsupportedVersion,
)
from .field import CriticalType, ScalarField, build_field, classify_vertex, link_neighbors  # noqa: E402
from .metrics import bottleneck, max_norm, p_norm, psnr, wasserstein  # noqa: E402
from .persistence import (  # noqa: E402
    PairClass,
    PersistenceDiagram,
    PersistencePair,
    brute_force_diagram,
    compute_diagram,
    filter_diagram,
)
from .pipeline import (  # noqa: E402
    compress,
    compress_skip_simplification,
    crop_to_intervals,
    decompress,
    sq_r_compress,
    sq_r_decompress,
)
from .quantize import IntervalPartition, QuantizedField, build_partition, quantize  # noqa: E402
from .simplify import ConstraintSet, rebuild_offsets, simplify  # noqa: E402
