"""Command-line entry point: ``nvmech-figures render --kind ... --in ... --out ...``."""

from __future__ import annotations

import argparse
import sys

from .render import FIGURE_KINDS, PlotSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nvmech-figures",
        description="Render figures from simulation CSV/JSON results",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure")
    p.add_argument("--kind", required=True, choices=sorted(FIGURE_KINDS))
    p.add_argument("--in", dest="inputs", nargs="+", required=True,
                   metavar="CSV", help="input result CSVs (sidecars found by basename)")
    p.add_argument("--out", required=True, help="output image path (.png or .svg)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = PlotSpec(kind=args.kind, csv_paths=tuple(args.inputs), out_path=args.out)
        result = render(spec)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not result["match"]:
        print("error: plotted data does not match the CSV columns", file=sys.stderr)
        return 2
    print(result["out_path"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
