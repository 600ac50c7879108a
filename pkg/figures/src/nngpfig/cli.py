"""Command line interface: render figures from results CSV files."""

from __future__ import annotations

import argparse
import sys

from .figures import DEFAULT_REFERENCE_SLOPES, FigureRequest, render
from .parser import CsvFormatError


def _slopes(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad slope list {text!r}: {exc}") from None
    if not values:
        raise argparse.ArgumentTypeError("slope list is empty")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nngpfig",
        description="Render decay charts and Gaussian-overlay histograms "
        "from results CSV files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    decay = sub.add_parser(
        "decay", help="log-log distance-vs-width chart with reference slopes"
    )
    decay.add_argument("--in", dest="input_path", required=True,
                       help="results CSV (convergence/ablation/last-layer)")
    decay.add_argument("--out", dest="output_path", required=True,
                       help="image path; .png or .svg picks the format")
    decay.add_argument(
        "--slopes", type=_slopes, default=DEFAULT_REFERENCE_SLOPES,
        help='comma reference slopes; leading minus needs "=" '
        "(e.g. --slopes=-0.5,-0.25)",
    )

    overlay = sub.add_parser(
        "overlay", help="sample histogram with Gaussian density overlay"
    )
    overlay.add_argument("--in", dest="input_path", required=True,
                         help="samples CSV (single value column)")
    overlay.add_argument("--out", dest="output_path", required=True,
                         help="image path; .png or .svg picks the format")
    overlay.add_argument(
        "--variance", type=float, default=None,
        help="Gaussian variance for the overlay; defaults to the "
        "limit_variance field of the samples file's metadata",
    )
    return parser


def parse_and_dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "decay":
        request = FigureRequest(
            input_path=args.input_path,
            kind="decay",
            output_path=args.output_path,
            reference_slopes=args.slopes,
        )
    else:
        request = FigureRequest(
            input_path=args.input_path,
            kind="overlay",
            output_path=args.output_path,
            variance=args.variance,
        )
    render(request)
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        return parse_and_dispatch(argv)
    except (CsvFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
