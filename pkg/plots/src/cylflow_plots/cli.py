"""Command line: ``plot <csv> --kind <kind> --out <png>``."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotJob, render
from .traceio import SchemaError


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render a figure from a cylinder-flow trace CSV with the "
                    "theoretical envelope overlaid.")
    parser.add_argument("csv", help="trace CSV (cylflow run output)")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--out", required=True, help="output image path (png)")
    parser.add_argument("--constants", default=None,
                        help="verify summary TSV; default: refit locally with "
                             "the same window conventions")
    parser.add_argument("--no-annotate", action="store_true",
                        help="omit the fitted-constant annotation box")
    args = parser.parse_args(argv)
    try:
        result = render(PlotJob(csv_path=args.csv, kind=args.kind,
                                out_path=args.out,
                                annotate=not args.no_annotate,
                                constants_path=args.constants))
    except (SchemaError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    print(f"{args.kind}: constant {result.constant:.12g} ({result.constant_source}) "
          f"-> {result.out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
