"""Batch command line: experiment CSVs in, one convergence figure out."""

from __future__ import annotations

import argparse
import sys

from .figures import ERROR_COLUMNS, IMAGE_FORMATS, FigureSpec, PlotDataError, \
    plot_convergence


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pseudovem-plots",
        description="Render log-log convergence figures from run CSVs.",
    )
    parser.add_argument("csvs", nargs="+", help="run CSV files to overlay")
    parser.add_argument("--out", default="convergence.png",
                        help="output image path (default: convergence.png)")
    parser.add_argument("--format", choices=IMAGE_FORMATS, default="png",
                        help="raster (png) or vector (svg) output")
    parser.add_argument("--columns", default="e_u,e_sigma,e_p",
                        help=f"comma-separated series (from {ERROR_COLUMNS})")
    parser.add_argument("--slopes", default="1",
                        help="comma-separated reference slopes (default: 1)")
    parser.add_argument("--title", default=None, help="figure title")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        slopes = tuple(float(s) for s in args.slopes.split(",") if s.strip())
        spec = FigureSpec(
            csv_paths=tuple(args.csvs),
            columns=tuple(c.strip() for c in args.columns.split(",") if c.strip()),
            reference_slopes=slopes,
            output=args.out,
            image_format=args.format,
            title=args.title,
        )
        report = plot_convergence(spec)
    except (PlotDataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {report.output} ({len(report.series)} series)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
