"""Command-line entry point: nrnk-export.

Exit codes mirror the ranking CLI: 0 success, 1 export failure, 2 bad flags.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .export import ExportSpec, export_activations
from .nrnk import ExportError


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nrnk-export",
        description="Run a labeled dataset through a trained torch model and "
                    "write per-layer NRNK activation files plus a manifest.")
    parser.add_argument("--model", required=True,
                        help="pickled nn.Module file (torch.save)")
    parser.add_argument("--data", required=True,
                        help=".npz archive with arrays 'x' (inputs) and 'y' (labels)")
    parser.add_argument("--capture", action="append", required=True,
                        help="capture point: a named module, or 'input' "
                             "(repeatable, or comma-separated)")
    parser.add_argument("--dataset-id", required=True, dest="dataset_id")
    parser.add_argument("--model-id", required=True, dest="model_id")
    parser.add_argument("--out-dir", required=True, dest="out_dir")
    parser.add_argument("--batch-size", type=_positive_int, default=64,
                        dest="batch_size")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    points = [p for chunk in args.capture for p in chunk.split(",") if p]
    try:
        spec = ExportSpec(model_path=args.model, data_path=args.data,
                          capture_points=points, dataset_id=args.dataset_id,
                          model_id=args.model_id, output_dir=args.out_dir,
                          batch_size=args.batch_size)
        manifest_path = export_activations(spec)
    except (ExportError, OSError) as exc:
        print(f"nrnk-export: {exc}", file=sys.stderr)
        return 1
    print(manifest_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
