"""Command line interface.

Exit codes: 0 success, 1 usage, 2 I/O, 3 bad input or corrupt archive,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .codec import FLAG_SOURCE_F32, MAGIC, decode
from .errors import ArchiveError, FieldError, TopcError
from .field import build_field
from .metrics import bottleneck, max_norm, p_norm, psnr, wasserstein
from .persistence import PairClass, compute_diagram
from .pipeline import compress_with_report, decompress
from .rawio import DTYPES, parse_dims, read_header, read_raw, write_header, write_raw

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_FORMAT, EXIT_INTERNAL = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class InvariantError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _dims(text):
    try:
        return parse_dims(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="topc", description="Topologically controlled lossy compression of scalar fields.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("compress", help="compress a raw grid")
    c.add_argument("input")
    c.add_argument("--dims", type=_dims, help="NX,NY[,NZ] (read from INPUT.hdr if omitted)")
    c.add_argument("--dtype", choices=sorted(DTYPES), help="f32 or f64 (INPUT.hdr, else f64)")
    eps = c.add_mutually_exclusive_group(required=True)
    eps.add_argument("--epsilon", help="threshold as a percentage of the value range, e.g. 5%% or 5")
    eps.add_argument("--epsilon-abs", type=float, help="absolute threshold")
    c.add_argument("--pointwise", action="store_true", help="bound the pointwise error by 3/2 epsilon")
    c.add_argument("--external", choices=["uq8"], help="append an external lossy stream")
    c.add_argument("--skip-simplification", action="store_true",
                   help="quantize the input directly and simplify only at decompression")
    c.add_argument("--backend", choices=["bz2", "zlib"], default="bz2")
    c.add_argument("-o", "--output", required=True)

    d = sub.add_parser("decompress", help="reconstruct a raw grid from an archive")
    d.add_argument("input")
    d.add_argument("-o", "--output", required=True)
    d.add_argument("--dtype", choices=sorted(DTYPES), help="defaults to the dtype of the compressed source")
    d.add_argument("--no-header", action="store_true", help="do not write the OUTPUT.hdr sidecar")

    g = sub.add_parser("diagram", help="export the persistence diagram as CSV")
    g.add_argument("input", help=".raw grid or .topc archive")
    g.add_argument("--dims", type=_dims, help="raw input only (read from INPUT.hdr if omitted)")
    g.add_argument("--dtype", choices=sorted(DTYPES))
    g.add_argument("-o", "--output", help="CSV path (stdout if omitted)")

    m = sub.add_parser("compare", help="error and diagram distances between two raw grids, as JSON")
    m.add_argument("a")
    m.add_argument("b")
    m.add_argument("--dims", type=_dims)
    m.add_argument("--dtype", choices=sorted(DTYPES))
    m.add_argument("--dtype-b", choices=sorted(DTYPES), help="dtype of the second grid if different")
    m.add_argument("--archive", help="archive of b, used to report its compression rate")
    m.add_argument("--diagrams", action="store_true", help="also report per-class pair counts")

    s = sub.add_parser("stats", help="archive header and sizes as JSON")
    s.add_argument("input")
    return p


def _raw_layout(path, dims, dtype):
    """Command-line values win over the sidecar; dtype falls back to f64."""
    try:
        hdr = read_header(path)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    dims = dims or hdr.get("dims")
    if dims is None:
        raise UsageError(f"--dims is required for {path} (no sidecar header found)")
    return dims, dtype or hdr.get("dtype", "f64")


def _load_field(path, dims, dtype):
    dims, dtype = _raw_layout(path, dims, dtype)
    return build_field(dims, read_raw(path, dims, dtype)), dtype


def _is_archive(path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(len(MAGIC)) == MAGIC


def _json_number(x):
    if x is None:
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def cmd_compress(args, out):
    field, dtype = _load_field(args.input, args.dims, args.dtype)
    if args.epsilon is not None:
        text = args.epsilon.strip()
        epsilon = text if text.endswith("%") else text + "%"
    else:
        epsilon = args.epsilon_abs
    try:
        report = compress_with_report(
            field, epsilon, pointwise=args.pointwise, external=args.external, backend=args.backend,
            skip_simplification=args.skip_simplification, source_f32=dtype == "f32",
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    Path(args.output).write_bytes(report.archive)
    rate = field.n_vertices * DTYPES[dtype].itemsize / len(report.archive)
    print(f"{args.output}: {len(report.archive)} bytes, rate {rate:.3f}, epsilon {report.epsilon!r}, "
          f"{len(report.kept)} of {len(report.diagram)} pairs kept", file=out)
    if not report.exact:
        raise InvariantError("simplified diagram differs from the kept pairs; archive written anyway")


def cmd_decompress(args, out):
    data = Path(args.input).read_bytes()
    field = decompress(data)
    header = decode(data).header
    dtype = args.dtype or ("f32" if header.flags & FLAG_SOURCE_F32 else "f64")
    write_raw(args.output, field.values, dtype)
    if not args.no_header:
        write_header(args.output, field.dims, dtype)
    print(f"{args.output}: {field.n_vertices} values as {dtype}", file=out)


def cmd_diagram(args, out):
    if _is_archive(args.input):
        field = decompress(Path(args.input).read_bytes())
    else:
        field, _ = _load_field(args.input, args.dims, args.dtype)
    text = compute_diagram(field).to_csv()
    if args.output:
        Path(args.output).write_text(text)
    else:
        out.write(text)


def cmd_compare(args, out):
    fa, _ = _load_field(args.a, args.dims, args.dtype)
    fb, _ = _load_field(args.b, args.dims or fa.dims, args.dtype_b or args.dtype)
    if fa.dims != fb.dims:
        raise UsageError(f"grids differ in shape: {fa.dims} vs {fb.dims}")
    result = {
        "bottleneck": None,
        "wasserstein": None,
        "psnr": _json_number(psnr(fa, fb)),
        "max_norm": max_norm(fa, fb),
        "l2_norm": p_norm(fa, fb, 2),
        "compression_rate": None,
    }
    da, db = compute_diagram(fa), compute_diagram(fb)
    notes = []
    for key, fn in (("bottleneck", bottleneck), ("wasserstein", wasserstein)):
        try:
            result[key] = fn(da, db)
        except ValueError as exc:
            notes.append(f"{key}: {exc}")
    if args.archive:
        result["compression_rate"] = decode(Path(args.archive).read_bytes()).header.compression_rate
    if args.diagrams:
        result["diagrams"] = {
            name: {cls.name.lower(): int(np.sum(d.pair_class == cls)) for cls in PairClass}
            for name, d in (("a", da), ("b", db))
        }
    if notes:
        result["notes"] = notes
    json.dump(result, out, indent=2)
    out.write("\n")


def cmd_stats(args, out):
    data = Path(args.input).read_bytes()
    decoded = decode(data)
    h = decoded.header
    result = {
        "magic": MAGIC.decode(),
        "version": h.version,
        "flags": {
            "pointwise": h.pointwise,
            "external": h.external,
            "backend": h.backend,
            "source_f32": bool(h.flags & FLAG_SOURCE_F32),
            "sq_r": h.sqr,
        },
        "dims": list(h.dims),
        "epsilon": h.epsilon,
        "n_vertices": h.n_vertices,
        "n_c": h.n_c,
        "n_i": h.n_i,
        "payload_bytes": h.payload_bytes,
        "archive_bytes": h.archive_bytes,
        "compression_rate": h.compression_rate,
    }
    json.dump(result, out, indent=2)
    out.write("\n")


COMMANDS = {
    "compress": cmd_compress,
    "decompress": cmd_decompress,
    "diagram": cmd_diagram,
    "compare": cmd_compare,
    "stats": cmd_stats,
}


def run(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=err)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help and --version
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=err)
        return EXIT_IO
    except (ArchiveError, FieldError) as exc:
        print(f"format error: {exc}", file=err)
        return EXIT_FORMAT
    except (InvariantError, TopcError) as exc:
        print(f"internal error: {exc}", file=err)
        return EXIT_INTERNAL
    except Exception as exc:  # never fail silently
        print(f"internal error: {type(exc).__name__}: {exc}", file=err)
        return EXIT_INTERNAL
    return EXIT_OK


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
