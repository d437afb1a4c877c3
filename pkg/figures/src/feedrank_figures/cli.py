"""Render figures from a feedrank output directory.

Usage: feedrank-figures --in-dir RESULTS [--fig kind|all]

PNG files land beside the input CSVs. Schema problems (missing files,
missing columns, empty tables) exit with code 1 and a message naming the
offender.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import BUILDERS, render
from .schema import SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feedrank-figures",
        description="Render simulation figures from emitted CSV data.",
    )
    parser.add_argument("--in-dir", required=True, help="directory holding the CSV outputs")
    parser.add_argument("--fig", default="all", choices=sorted(BUILDERS) + ["all"],
                        help="figure kind to render (default: all with available inputs)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    in_dir = Path(args.in_dir)
    if not in_dir.is_dir():
        print(f"error: {in_dir} is not a directory", file=sys.stderr)
        return 1
    try:
        written = render(in_dir, args.fig)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
