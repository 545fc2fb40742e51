"""Command-line interface.

Verbs:
  plots drift <csv> -o <png>
  plots contours <pattern> --times 0,1,2 -o <png>
"""

import argparse
import sys

from .figures import plot_density_contours, plot_drift
from .io import FormatError


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="plots", description="figures from solver diagnostics files"
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_drift = sub.add_parser("drift", help="semilog drift plot from a CSV")
    p_drift.add_argument("csv")
    p_drift.add_argument("-o", "--out", required=True)

    p_cont = sub.add_parser(
        "contours", help="density contour panels from VTK snapshots"
    )
    p_cont.add_argument("pattern")
    p_cont.add_argument(
        "--times", required=True, help="comma-separated snapshot times"
    )
    p_cont.add_argument("-o", "--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.verb == "drift":
            plot_drift(args.csv, args.out)
            print(f"wrote {args.out}")
            return 0
        times = [float(v) for v in args.times.split(",") if v.strip()]
        if not times:
            print("no times requested", file=sys.stderr)
            return 2
        _, skipped = plot_density_contours(args.pattern, times, args.out)
        print(f"wrote {args.out}")
        return 0
    except (FormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
