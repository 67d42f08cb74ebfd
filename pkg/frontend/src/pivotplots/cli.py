"""Render figure specs from the command line: pivotplots SPEC [SPEC ...]"""

from __future__ import annotations

import argparse
import sys

from .render import render
from .specs import SpecError, load_spec


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="pivotplots", description="Render figure specs to image files")
    parser.add_argument("specs", nargs="+", help="figure spec files (JSON)")
    args = parser.parse_args(argv)
    try:
        for spec_path in args.specs:
            output = render(load_spec(spec_path))
            print(f"{spec_path} -> {output}")
    except (SpecError, OSError) as exc:
        print(f"pivotplots: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
