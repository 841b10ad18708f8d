"""Command-line surface: rank, sweep, sensitivity, agree, viz, validate, synth.

Exit codes: 0 success (at least one model scored, no hard failure),
1 scoring or validation failure, 2 bad flags. Human-readable diagnostics
go to stderr; stdout carries only tables and machine-readable output.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import NeuralRankError
from .metrics import DenominatorMode, DistanceMetric, ZeroNormMode
from .ranker import (
    LAST_DENSE,
    ScoreReport,
    config_digest,
    layer_sweep,
    neural_rank,
    pca_sensitivity,
    rank_accuracy_agreement,
    viz_export,
)
from .store import load_manifest, read_embedding_file
from .synth import synth_zoo

logger = logging.getLogger("neuralrank")


@dataclass
class RunConfig:
    """Scoring configuration; the digest covers every field."""

    manifest_path: str | None = None
    layer: str = LAST_DENSE
    pca_d: int = 10
    metric: str = "cosine"
    denominator_mode: str = "mean"
    zero_norm_mode: str = "error"
    output_format: str = "json"
    seed: int | None = None

    def digest(self) -> str:
        return config_digest(asdict(self))


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return value


def _int_grid(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; expected e.g. 5,10,20,50") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad list {text!r}; expected e.g. 4.0,1.0,0.0") from None


def _add_scoring_flags(p: argparse.ArgumentParser, with_layer: bool = True) -> None:
    p.add_argument("--manifest", required=True, help="zoo manifest JSON path")
    if with_layer:
        p.add_argument("--layer", default=LAST_DENSE,
                       help="layer selector: a layer id, '#<n>' for a positional "
                            "index, or 'last-dense' (default)")
    p.add_argument("--d", type=_positive_int, default=10, dest="pca_d",
                   help="PCA target dimensionality (default 10)")
    p.add_argument("--metric", choices=[m.value for m in DistanceMetric],
                   default="cosine")
    p.add_argument("--denominator", choices=[m.value for m in DenominatorMode],
                   default="mean", help="normalization of centroid/cohesion sums")
    p.add_argument("--zero-norm", choices=[m.value for m in ZeroNormMode],
                   default="error", dest="zero_norm",
                   help="'epsilon' adds 1e-12 to norms instead of erroring on zero rows")
    p.add_argument("--jobs", type=_positive_int, default=None,
                   help="parallel model-scoring workers (default: CPU count; "
                        "NEURALRANK_JOBS overrides)")


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="write the report to this path")
    p.add_argument("--format", choices=["json", "csv"], default="json",
                   help="report output format (csv writes entries only)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neuralrank",
        description="Rank pre-trained models for a labeled target dataset by "
                    "the cluster quality of their latent-space activations.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rank", help="score and rank every model in a zoo")
    _add_scoring_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("sweep", help="score one model at every declared layer")
    _add_scoring_flags(p, with_layer=False)
    p.add_argument("--model", required=True, help="model_id to sweep")
    _add_output_flags(p)

    p = sub.add_parser("sensitivity", help="score the zoo over a grid of PCA dims")
    _add_scoring_flags(p)
    p.add_argument("--grid", type=_int_grid, required=True,
                   help="comma-separated increasing PCA dims, e.g. 5,10,20,50")
    _add_output_flags(p)

    p = sub.add_parser("agree", help="rank correlation of scores vs reported accuracy")
    _add_scoring_flags(p)
    p.add_argument("--report", default=None,
                   help="use an existing rank report JSON instead of re-scoring")
    _add_output_flags(p)

    p = sub.add_parser("viz", help="export a 3-D PCA of one embedding file as CSV")
    p.add_argument("--embedding", required=True, help="NRNK embedding file")
    p.add_argument("--metric", choices=[m.value for m in DistanceMetric],
                   default="cosine")
    p.add_argument("--out", required=True, help="CSV output path")

    p = sub.add_parser("validate", help="check NRNK files and manifests without scoring")
    p.add_argument("--manifest", default=None, help="manifest to validate (with its files)")
    p.add_argument("--embedding", action="append", default=[],
                   help="NRNK file to validate (repeatable)")
    p.add_argument("--out", default=None, help="also write the summary lines to this path")

    p = sub.add_parser("synth", help="generate a planted-separation synthetic zoo")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--separations", type=_float_list, required=True,
                   help="comma-separated separation level per model, e.g. 4.0,1.0,0.0")
    p.add_argument("--classes", type=_positive_int, default=5)
    p.add_argument("--samples", type=_positive_int, default=500)
    p.add_argument("--dims", type=_positive_int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dataset-id", default="synthetic", dest="dataset_id")
    return parser


def _jobs(args) -> int | None:
    env = os.environ.get("NEURALRANK_JOBS")
    if env:
        return max(1, int(env))
    return getattr(args, "jobs", None)


def _write_report(report, out: str | None, fmt: str) -> None:
    if out is None:
        return
    path = Path(out)
    if fmt == "csv":
        lines = [",".join(str(c) for c in row) for row in report.csv_rows()]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
    logger.info("report written to %s", path)


def _print_failures(failures) -> None:
    for f in failures:
        print(f"error: {f.model_id}: [{f.error}] {f.detail}", file=sys.stderr)


def _cmd_rank(args) -> int:
    cfg = RunConfig(manifest_path=args.manifest, layer=args.layer, pca_d=args.pca_d,
                    metric=args.metric, denominator_mode=args.denominator,
                    zero_norm_mode=args.zero_norm, output_format=args.format)
    manifest = load_manifest(args.manifest)
    report = neural_rank(manifest, layer=args.layer, d=args.pca_d,
                         metric=DistanceMetric(args.metric),
                         denominator=DenominatorMode(args.denominator),
                         zero_norm=ZeroNormMode(args.zero_norm),
                         jobs=_jobs(args), digest=cfg.digest())
    print(f"{'rank':>4}  {'model_id':<24}{'sc_score':>12}  {'layer':<12}{'d_eff':>5}")
    for e in report.entries:
        print(f"{e.rank:>4}  {e.model_id:<24}{e.sc_score:>12.6f}  "
              f"{e.layer_id:<12}{e.pca_d_effective:>5}")
    _print_failures(report.errors)
    _write_report(report, args.out, args.format)
    return 0


def _cmd_sweep(args) -> int:
    manifest = load_manifest(args.manifest)
    report = layer_sweep(manifest, args.model, d=args.pca_d,
                         metric=DistanceMetric(args.metric),
                         denominator=DenominatorMode(args.denominator),
                         zero_norm=ZeroNormMode(args.zero_norm))
    print(f"{'layer':<12}{'sc_score':>12}")
    for layer_id, score in report.points:
        print(f"{layer_id:<12}{score:>12.6f}")
    _write_report(report, args.out, args.format)
    return 0


def _cmd_sensitivity(args) -> int:
    manifest = load_manifest(args.manifest)
    report = pca_sensitivity(manifest, args.layer, args.grid,
                             metric=DistanceMetric(args.metric),
                             denominator=DenominatorMode(args.denominator),
                             zero_norm=ZeroNormMode(args.zero_norm),
                             jobs=_jobs(args))
    print("pca_d ranking changes at: "
          + (", ".join(str(v) for v in report.ranking_change_points) or "none"))
    for curve in report.curves:
        pts = "  ".join(f"D={d}:{s:.4f}" for d, s in curve.points)
        print(f"{curve.model_id:<24}{pts}")
    _print_failures(report.errors)
    _write_report(report, args.out, args.format)
    return 0


def _cmd_agree(args) -> int:
    manifest = load_manifest(args.manifest, require_files=args.report is None)
    if args.report:
        raw = json.loads(Path(args.report).read_text(encoding="utf-8"))
        report = ScoreReport.from_dict(raw)
    else:
        report = neural_rank(manifest, layer=args.layer, d=args.pca_d,
                             metric=DistanceMetric(args.metric),
                             denominator=DenominatorMode(args.denominator),
                             zero_norm=ZeroNormMode(args.zero_norm),
                             jobs=_jobs(args))
    agreement = rank_accuracy_agreement(report, manifest)
    print(f"spearman_rho {agreement.spearman_rho:.6f}")
    print(f"kendall_tau  {agreement.kendall_tau:.6f}")
    _write_report(agreement, args.out, args.format)
    return 0


def _cmd_viz(args) -> int:
    es = read_embedding_file(args.embedding)
    with open(args.out, "wb") as fh:
        viz_export(es, DistanceMetric(args.metric), fh)
    logger.info("viz CSV written to %s", args.out)
    return 0


def _cmd_validate(args) -> int:
    if not args.manifest and not args.embedding:
        print("validate: pass --manifest and/or --embedding", file=sys.stderr)
        return 2
    lines: list[str] = []
    if args.manifest:
        manifest = load_manifest(args.manifest)
        lines.append(f"ok\tmanifest\t{args.manifest}\t{len(manifest.models)} models")
        for entry in manifest.models:
            for ref in entry.layers:
                es = read_embedding_file(ref.resolved_path)
                problems = []
                if es.dims != ref.dims:
                    problems.append(f"dims {es.dims} != declared {ref.dims}")
                if es.dataset_id != manifest.dataset_id:
                    problems.append(f"dataset {es.dataset_id!r} != manifest "
                                    f"{manifest.dataset_id!r}")
                if problems:
                    raise NeuralRankError(
                        f"{ref.path} ({entry.model_id}/{ref.layer_id}): "
                        + "; ".join(problems))
                lines.append(f"ok\tembedding\t{ref.path}\t{es.rows}x{es.dims}")
    for path in args.embedding:
        es = read_embedding_file(path)
        lines.append(f"ok\tembedding\t{path}\t{es.rows}x{es.dims}")
    for line in lines:
        print(line)
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info("validated %d file(s)", len(lines))
    return 0


def _cmd_synth(args) -> int:
    manifest_path = synth_zoo(args.separations, classes=args.classes,
                              samples=args.samples, dims=args.dims,
                              seed=args.seed, out_dir=args.out,
                              dataset_id=args.dataset_id)
    print(manifest_path)
    return 0


_COMMANDS = {
    "rank": _cmd_rank,
    "sweep": _cmd_sweep,
    "sensitivity": _cmd_sensitivity,
    "agree": _cmd_agree,
    "viz": _cmd_viz,
    "validate": _cmd_validate,
    "synth": _cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (NeuralRankError, OSError, json.JSONDecodeError) as exc:
        print(f"neuralrank {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
