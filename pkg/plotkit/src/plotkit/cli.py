"""Command-line interface: render a figure from a JSON spec."""

from __future__ import annotations

import argparse
import sys

from plotkit.figures import load_spec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plotkit", description="Render simulator result CSVs into figures "
                                    "with golden-testable data manifests.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("plot", help="render one figure from a JSON spec")
    p.add_argument("--spec", required=True, help="path to the figure spec (JSON)")
    args = parser.parse_args(argv)

    spec = load_spec(args.spec)
    series = render(spec)
    print(f"rendered {len(series)} series to {spec.out}; manifest {spec.manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
