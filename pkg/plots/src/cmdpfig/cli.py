"""Command-line surface: plot, plot-figure1."""

from __future__ import annotations

import argparse
import sys

from .figures import FigureSpec, render_figure1, render_panel
from .readers import METRICS, SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cmdpfig", description="Render comparison figures from run-log CSVs")
    parser.add_argument("--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plot", help="render one metric panel from a CSV glob")
    p.add_argument("--glob", required=True, help="e.g. 'out/**/seed=*.csv'")
    p.add_argument("--metric", required=True, choices=METRICS)
    p.add_argument("--out", required=True)
    p.add_argument("--log-scale", action="store_true", help="log-scale the metric axis")
    p.add_argument("--rolling", type=int, default=0,
                   help="rolling-mean window; off (exact CSV values) unless set")

    p = sub.add_parser("plot-figure1", help="render the 2x2 algorithm comparison")
    p.add_argument("--root", required=True,
                   help="sweep root holding npgpd/ and zpgpd/ subtrees")
    p.add_argument("--out", required=True)
    p.add_argument("--log-scale", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plot":
            spec = FigureSpec(input_glob=args.glob, metric=args.metric, output=args.out,
                              log_scale=args.log_scale, rolling_window=args.rolling)
            path = render_panel(spec)
        else:
            path = render_figure1(args.root, args.out, log_scale=args.log_scale)
    except (SchemaError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    if not args.quiet:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
