"""Regenerate every figure dataset and print the acceptance flags.

Usage: python scripts/reproduce_figures.py [--out DIR]
"""

import argparse
import sys

from flowshortcuts.io import output_dir
from flowshortcuts.pipeline import FIGURES, reproduce


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", help="output directory (default: $FLOWSHORTCUTS_OUTPUT_DIR or ./results)")
    p.add_argument("figures", nargs="*", default=list(FIGURES), choices=FIGURES)
    args = p.parse_args()
    out = output_dir(args.out)
    ok = True
    for fig in args.figures:
        m = reproduce(fig, out)
        for flag, value in m.acceptance.items():
            print(f"{fig:13s} {flag:32s} {value}")
            ok &= bool(value)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
