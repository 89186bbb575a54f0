"""Raw little-endian grids: x varies fastest, then y, then z."""

from __future__ import annotations

from pathlib import Path

import numpy as np

DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


def parse_dims(text: str) -> tuple[int, int, int]:
    """``"NX,NY"`` or ``"NX,NY,NZ"`` to a 3-tuple (NZ defaults to 1)."""
    parts = [p.strip() for p in text.replace("x", ",").split(",") if p.strip()]
    if len(parts) not in (2, 3):
        raise ValueError(f"dims must be NX,NY or NX,NY,NZ, got {text!r}")
    dims = tuple(int(p) for p in parts)
    if any(d < 1 for d in dims):
        raise ValueError(f"dims must be positive, got {text!r}")
    return dims + (1,) * (3 - len(dims))


def read_raw(path, dims, dtype: str = "f64") -> np.ndarray:
    """Flat float64 values of a raw grid file."""
    dt = DTYPES[dtype]
    n = int(np.prod(dims))
    size = Path(path).stat().st_size
    if size != n * dt.itemsize:
        raise OSError(f"{path}: {size} bytes, dims {tuple(dims)} as {dtype} need {n * dt.itemsize}")
    return np.fromfile(path, dtype=dt).astype(np.float64)


def write_raw(path, values, dtype: str = "f64") -> None:
    np.asarray(values, dtype=DTYPES[dtype]).tofile(path)


def header_path(path) -> Path:
    return Path(str(path) + ".hdr")


def read_header(path) -> dict:
    """Parse a ``key=value`` sidecar (``dims``, ``dtype``, ``order``).

    Returns ``{}`` when ``<path>.hdr`` does not exist.
    """
    hdr = header_path(path)
    if not hdr.exists():
        return {}
    out = {}
    for lineno, line in enumerate(hdr.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{hdr}:{lineno}: expected key=value")
        out[key.strip().lower()] = value.strip()
    if out.get("order", "row-major") != "row-major":
        raise ValueError(f"{hdr}: only order=row-major is supported")
    if "dtype" in out and out["dtype"] not in DTYPES:
        raise ValueError(f"{hdr}: unknown dtype {out['dtype']!r}")
    if "dims" in out:
        out["dims"] = parse_dims(out["dims"])
    return out


def write_header(path, dims, dtype: str) -> None:
    nx, ny, nz = dims
    header_path(path).write_text(f"dims={nx},{ny},{nz}\ndtype={dtype}\norder=row-major\n")
