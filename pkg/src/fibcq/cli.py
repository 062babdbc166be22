"""Command-line front end.

Exit codes: 0 success, 1 contract or data error, 2 usage or I/O error.
Reports go to stdout as ``key=value`` records, one per line.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import container as fqz
from .codec import compression_report, compression_ratio, CompressionReport
from .demo import forced_inq, parse_tau, toy_inq
from .errors import FibcqError
from .hwmodel import build_array, cost_report, discover_replaceable, reference_replaced_count
from .pipeline import (
    REFERENCE_SAVING_VS_16B,
    REFERENCE_SAVING_VS_8B,
    SCHEMES,
    compress_container,
    compression_stats,
    container_inventory,
    decompress_container,
    memory_report,
    params_to_container,
    quantize_container,
)

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def sample_weights_bytes() -> bytes:
    return resources.files("fibcq").joinpath("data/toy_weights.fqz").read_bytes()


def _load(path: str) -> fqz.Container:
    if path == "sample":
        return fqz.read(sample_weights_bytes())
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    if p.suffix == ".npz":
        with np.load(p) as data:
            return params_to_container({k: data[k] for k in data.files})
    try:
        return fqz.load(p)
    except OSError as exc:
        raise UsageError(str(exc)) from None


def _save(container: fqz.Container, path: str) -> None:
    try:
        fqz.save(container, path)
    except OSError as exc:
        raise UsageError(str(exc)) from None


def cmd_quantize(args) -> int:
    out, records = quantize_container(_load(args.inp), args.scheme)
    _save(out, args.out)
    for r in records:
        print(r.to_text())
    return EXIT_OK


def cmd_compress(args) -> int:
    if args.group < 1:
        raise UsageError("--group must be >= 1")
    out, report = compress_container(_load(args.inp), args.group)
    _save(out, args.out)
    print(report.to_text() + f" group={args.group}")
    return EXIT_OK


def cmd_decompress(args) -> int:
    out = decompress_container(_load(args.inp))
    _save(out, args.out)
    print(f"record=decompress tensors={len(out)}")
    return EXIT_OK


def cmd_stats(args) -> int:
    if args.inp is None:
        if args.ul is None or args.cl is None:
            raise UsageError("stats needs --in PATH or both --ul and --cl")
        cr = compression_ratio(args.ul, 8, args.cl, 8)
        print(CompressionReport(args.ul, 8, args.cl, 8, cr, 0, cr).to_text())
        return EXIT_OK
    src = _load(args.inp)
    report = compression_stats(src)
    if report.UL == 0:
        report = compression_report([], [])
    print(report.to_text())
    print(memory_report(container_inventory(src)).to_text())
    print(f"record=reference saving_vs_16b={REFERENCE_SAVING_VS_16B} saving_vs_8b={REFERENCE_SAVING_VS_8B}")
    return EXIT_OK


def cmd_hw_report(args) -> int:
    n = args.bits
    replaced = reference_replaced_count(n) if args.replaced is None else args.replaced
    discovered = None
    if args.discover:
        discovered = len(discover_replaceable(build_array(n)))
    print(cost_report(n, replaced, discovered).to_text())
    if discovered is not None:
        print(cost_report(n, discovered).to_text().replace("record=cost", "record=cost_discovered", 1))
    return EXIT_OK


def cmd_inq_demo(args) -> int:
    if args.forced_degradation:
        result = forced_inq(args.tau)
        print(result.event_log())
        print(f"record=inq_summary frozen={len(result.frozen)} events={len(result.events)}")
        return EXIT_OK
    outcome = toy_inq(args.seed, args.tau, args.steps, args.mixed_split)
    print(outcome.result.event_log())
    print(outcome.summary())
    return EXIT_OK


def cmd_sample(args) -> int:
    try:
        Path(args.out).write_bytes(sample_weights_bytes())
    except OSError as exc:
        raise UsageError(str(exc)) from None
    return EXIT_OK


def _tau(text: str) -> float:
    try:
        return parse_tau(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fibcq", description="Fibonacci codeword quantization and fibbinary compression")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quantize", help="quantize float tensors (FQZ1 or .npz; 'sample' for bundled weights)")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scheme", choices=SCHEMES, required=True)
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("compress", help="word-length + word-count compress FCQ tensors")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--group", type=int, default=1, help="tensors sharing one (A, B) pair")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="restore compressed tensors to u8 codes")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("stats", help="compression ratio and memory report")
    p.add_argument("--in", dest="inp")
    p.add_argument("--ul", type=int, help="uncompressed length (formula mode)")
    p.add_argument("--cl", type=int, help="compressed length (formula mode)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("hw-report", help="approximate multiplier cost model")
    p.add_argument("--bits", type=int, default=8)
    p.add_argument("--replaced", type=int, help="FA cells replaced by OR gates (default (n^2-n)/2)")
    p.add_argument("--discover", action="store_true", help="also run the exhaustive replaceability oracle")
    p.set_defaults(func=cmd_hw_report)

    p = sub.add_parser("inq-demo", help="incremental quantization on the toy network")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tau", type=_tau, default=0.10, help="relative degradation threshold ('inf' disables refinement)")
    p.add_argument("--steps", type=int, default=1000, help="retrain steps per fraction")
    p.add_argument("--mixed-split", type=int, help="FCQ for tensors before this index, uniform after")
    p.add_argument("--forced-degradation", action="store_true", help="run the synthetic 18-tensor refinement fixture")
    p.set_defaults(func=cmd_inq_demo)

    p = sub.add_parser("sample", help="write the bundled float sample weights")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FibcqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
