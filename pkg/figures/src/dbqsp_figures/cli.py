"""dbqsp-fig: render one figure (or the summary report) per invocation."""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .render import RENDERERS, render, render_report
from .schemas import SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dbqsp-fig",
        description="Render dbqsp experiment CSVs into figures, or summary JSONs into a report.",
    )
    parser.add_argument("--kind", required=True, choices=sorted(RENDERERS) + ["report"],
                        help="experiment CSV kind, or 'report' for summary JSONs")
    parser.add_argument("--in", dest="inputs", required=True, nargs="+", metavar="FILE",
                        help="input CSV file(s) (overlaid), or summary JSONs for report")
    parser.add_argument("--out", required=True, help="output image or HTML file")
    parser.add_argument("--figure-dir", default=None,
                        help="report only: directory of figures to embed as thumbnails")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code else 0
    try:
        if args.kind == "report":
            render_report(args.inputs, args.out, figure_dir=args.figure_dir)
        else:
            render(args.kind, args.inputs, args.out)
    except SchemaError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
