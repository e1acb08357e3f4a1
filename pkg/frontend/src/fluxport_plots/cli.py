"""Command-line entry points: plot-timing and plot-roofline."""

import argparse
import sys

from .csvio import SchemaError
from .roofline import plot_roofline
from .timing import plot_timing


def main_timing(argv=None):
    parser = argparse.ArgumentParser(
        prog="plot-timing",
        description="Render stacked-bar timing breakdowns from timing CSVs",
    )
    parser.add_argument("csv", nargs="+", help="timing CSV file(s)")
    parser.add_argument("-o", "--output", default="timing.png")
    parser.add_argument("--labels", nargs="*", default=None,
                        help="override bar labels (one per CSV)")
    args = parser.parse_args(argv)
    try:
        plot_timing(args.csv, args.labels, args.output)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.output}")
    return 0


def main_roofline(argv=None):
    parser = argparse.ArgumentParser(
        prog="plot-roofline",
        description="Render roofline plots from roofline CSVs",
    )
    parser.add_argument("csv", nargs="+",
                        help="roofline CSV file(s); several overlay")
    parser.add_argument("-o", "--output", default="roofline.png")
    args = parser.parse_args(argv)
    try:
        plot_roofline(args.csv, args.output)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.output}")
    return 0


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    if not argv or argv[0] not in ("timing", "roofline"):
        print("usage: python -m fluxport_plots.cli {timing|roofline} ...",
              file=sys.stderr)
        return 2
    if argv[0] == "timing":
        return main_timing(argv[1:])
    return main_roofline(argv[1:])


if __name__ == "__main__":
    sys.exit(main())
