"""Command line front end: banditnet-plot <panel> --in <csv...> --out <file>."""

from __future__ import annotations

import argparse
import sys

from .panels import PANELS, PlotSpec, render_panel
from .schema import SchemaError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="banditnet-plot",
        description="Render figure panels from banditnet aggregate CSVs",
    )
    parser.add_argument("panel", choices=PANELS, help="panel kind to render")
    parser.add_argument(
        "--in", dest="inputs", nargs="+", required=True, metavar="CSV",
        help="aggregate CSV file(s), one curve per file",
    )
    parser.add_argument("--out", required=True, help="output image (.png/.svg) or text file")
    parser.add_argument("--title", default=None, help="override the panel title")
    parser.add_argument(
        "--linear-error", action="store_true",
        help="linear instead of log y-axis on the estimation-error panel",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    spec = PlotSpec(
        panel=args.panel,
        input_csvs=list(args.inputs),
        output_path=args.out,
        title=args.title,
        log_error_axis=not args.linear_error,
    )
    try:
        render_panel(spec)
        return 0
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
