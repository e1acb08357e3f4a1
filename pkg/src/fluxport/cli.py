"""Command-line entry point: run, validate, and bench subcommands.

Exit codes are a stable contract: 0 on success, 1 on validation failure,
2 on usage, configuration, or I/O errors.
"""

import argparse
import os
import sys

from . import bench as fbench
from . import ensemble
from . import io as fio
from .errors import FluxportError, ValidationStructureError
from .kernels import BACKEND_NAME
from .parloop import Executor

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="fluxport",
        description="Surface flux-transport ensemble simulator "
                    f"(kernel backend: {BACKEND_NAME})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a simulation from a config file")
    p_run.add_argument("--config", required=True, help="path to config file")
    p_run.add_argument("--workers", type=int, default=None,
                       help="override worker count")
    p_run.add_argument("--deterministic",
                       action=argparse.BooleanOptionalAction, default=None,
                       help="override deterministic reduction mode")
    p_run.add_argument("--out", default=None, help="override output dir")

    p_val = sub.add_parser("validate",
                           help="compare a history file to a reference")
    p_val.add_argument("candidate")
    p_val.add_argument("reference")
    p_val.add_argument("--tol", type=float, default=1e-5,
                       help="relative tolerance (default 1e-5)")

    p_bench = sub.add_parser("bench",
                             help="run the roofline microbenchmarks")
    p_bench.add_argument("--n-items", type=int,
                         default=fbench.MIN_FMA_ITEMS,
                         help="FMA kernel item count (min 2^20)")
    p_bench.add_argument("--stream-n", type=int,
                         default=fbench.DEFAULT_STREAM_N,
                         help="stream buffer length in binary64 elements")
    p_bench.add_argument("--m-passes", type=int, default=8,
                         help="stream passes over the buffer")
    p_bench.add_argument("--repeats", type=int, default=5,
                         help="best-of-N repeats")
    p_bench.add_argument("--workers", type=int, default=None)
    p_bench.add_argument("--out", default=".",
                         help="directory for roofline.csv")
    return parser


def cmd_run(args):
    config = fio.load_config(args.config)
    if args.workers is not None:
        config.n_workers = args.workers
    if args.deterministic is not None:
        config.deterministic = args.deterministic
    if args.out is not None:
        config.output_dir = args.out
    result = ensemble.run(config)
    print(f"run complete: t = {result.state.sim_time:g} h in "
          f"{result.state.step_count} steps "
          f"({len(result.state.params)} realizations)")
    print(f"history: {result.history_path}")
    print(f"timing:  {result.timing_csv_path}")
    print(result.timing.format_breakdown())
    return EXIT_OK


def cmd_validate(args):
    try:
        report = fio.validate(args.candidate, args.reference, args.tol)
    except ValidationStructureError as exc:
        print(f"validation failed (structure): {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    print(report.format_table())
    if report.passed:
        print(f"PASS (tol {args.tol:g})")
        return EXIT_OK
    worst = report.worst_overall()
    print(f"FAIL (tol {args.tol:g}): column {worst.column} record "
          f"{worst.record} rel err {worst.rel_error:.6e}")
    return EXIT_VALIDATION


def cmd_bench(args):
    executor = Executor(args.workers) if args.workers else None
    sample = fbench.measure_sample(
        n_items=args.n_items, stream_n=args.stream_n,
        m_passes=args.m_passes, repeats=args.repeats, executor=executor,
    )
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "roofline.csv")
    fbench.emit_roofline(sample, csv_path)
    print(f"fp64:      {sample.fp64_gflops:.3f} GFLOP/s")
    print(f"read:      {sample.read_gbs:.3f} GB/s")
    print(f"write:     {sample.write_gbs:.3f} GB/s")
    print(f"bandwidth: {sample.bw_avg:.3f} GB/s "
          f"(min {sample.bw_min:.3f}, max {sample.bw_max:.3f})")
    print(f"ridge:     {sample.ridge_ai:.4f} FLOP/byte")
    print(f"stencil AI: {fbench.stencil_arithmetic_intensity():.4f} "
          f"FLOP/byte")
    print(f"roofline:  {csv_path}")
    return EXIT_OK


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": cmd_run, "validate": cmd_validate,
                "bench": cmd_bench}
    try:
        return handlers[args.command](args)
    except (FluxportError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
