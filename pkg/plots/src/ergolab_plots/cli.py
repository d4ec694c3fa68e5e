"""plots <kind> <csv> -o <png>: render one figure from one CSV."""

import argparse
import sys

from .errors import PlotsError
from .render import KINDS, PlotRequest, render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plots",
        description="render ergolab CSV outputs as diagnostic figures")
    parser.add_argument("kind", choices=list(KINDS), help="figure kind")
    parser.add_argument("csv", help="input CSV written by the lab")
    parser.add_argument("-o", "--out", required=True, help="output image path")
    parser.add_argument("--fits", default=None,
                        help="fits CSV for the tail annotation "
                             "(default: fits.csv next to the input)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        render(PlotRequest(kind=args.kind, csv=args.csv, out=args.out,
                           fits=args.fits))
    except PlotsError as e:
        print(f"plots: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"plots: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
