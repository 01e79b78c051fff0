"""Command line for rendering experiment CSVs into figures."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import SCHEMAS, FigureSpec, SchemaMismatch, render

EXIT_OK = 0
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relayee-plots",
        description="Render relayee experiment CSV outputs into figures.")
    sub = parser.add_subparsers(dest="command", required=True)
    rend = sub.add_parser("render", help="render one CSV into one image")
    rend.add_argument("--kind", required=True, choices=sorted(SCHEMAS),
                      help="figure type, fixing the expected CSV schema")
    rend.add_argument("--in", dest="input_csv", required=True,
                      help="input CSV produced by the relayee CLI")
    rend.add_argument("--out", dest="output_image", required=True,
                      help="output image path (.svg default style, .png works)")
    rend.add_argument("--title", default="")
    rend.add_argument("--xlabel", default="")
    rend.add_argument("--ylabel", default="")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(kind=args.kind, input_csv=Path(args.input_csv),
                      output_image=Path(args.output_image),
                      title=args.title, xlabel=args.xlabel,
                      ylabel=args.ylabel)
    try:
        out = render(spec)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SchemaMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
