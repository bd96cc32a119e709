"""Command line: render one figure from a sweep summary.

    wbanplot --kind min_sinr_time --in summary.csv --out fig.svg --schemes iaa,or,pc
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import KINDS, PlotError, PlotSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wbanplot")
    parser.add_argument("--kind", required=True, choices=sorted(KINDS))
    parser.add_argument("--in", dest="input_csv", required=True,
                        help="sweep summary CSV")
    parser.add_argument("--out", required=True, help="output image (.svg/.png)")
    parser.add_argument("--schemes", default="iaa,or,pc",
                        help="comma-separated schemes to overlay")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    schemes = tuple(s.strip() for s in args.schemes.split(",") if s.strip())
    try:
        spec = PlotSpec(input_csv=Path(args.input_csv), kind=args.kind,
                        output=Path(args.out), schemes=schemes)
        out = render(spec)
    except PlotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
