"""Zoo ranking and the experiment harnesses built on top of it.

The core loop scores one model at a time: load its embedding of the
target dataset at the selected layer, reduce to the requested number of
principal components, and take the mean silhouette of the reduced
embedding under the target labels. Models sort by score, descending.

A model that cannot be scored (missing layer, corrupt file, dead
activations) is captured in the report's errors section without touching
any other model's score. Models are independent and scored in parallel.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, BinaryIO, Sequence

import numpy as np
from scipy import stats

from .errors import EmptyReportError, NeuralRankError, ResolutionError, ValidationError
from .metrics import DenominatorMode, DistanceMetric, ZeroNormMode, silhouette
from .reduction import pca_fit_transform
from .store import EmbeddingSet, LayerRef, ModelEntry, ZooManifest, read_embedding_file

REPORT_SCHEMA = "neuralrank-report/v1"

# Symbolic layer selectors; everything else is a literal layer id, except
# the "#<n>" form which indexes the declared layer order.
LAST_DENSE = "last-dense"
_LAST_ALIASES = {LAST_DENSE, "last"}


@dataclass
class ScoreEntry:
    model_id: str
    layer_id: str
    sc_score: float
    degenerate_count: int
    pca_d_effective: int
    rank: int = 0


@dataclass
class ModelFailure:
    model_id: str
    error: str    # exception class name
    detail: str


@dataclass
class ScoreReport:
    """Ranked silhouette scores for a zoo against one target dataset."""

    target_dataset_id: str
    layer_selector: str
    metric: str
    denominator_mode: str
    zero_norm_mode: str
    pca_d_requested: int
    entries: list[ScoreEntry]
    errors: list[ModelFailure]
    generated_at: str
    config_digest: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": REPORT_SCHEMA,
            "kind": "rank",
            "target_dataset_id": self.target_dataset_id,
            "layer_selector": self.layer_selector,
            "metric": self.metric,
            "denominator_mode": self.denominator_mode,
            "zero_norm_mode": self.zero_norm_mode,
            "pca_d_requested": self.pca_d_requested,
            "generated_at": self.generated_at,
            "config_digest": self.config_digest,
            "entries": [vars(e).copy() for e in self.entries],
            "errors": [vars(e).copy() for e in self.errors],
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ScoreReport":
        if raw.get("schema") != REPORT_SCHEMA or raw.get("kind") != "rank":
            raise ValidationError("not a neuralrank rank report")
        entries = [ScoreEntry(**e) for e in raw["entries"]]
        errors = [ModelFailure(**e) for e in raw.get("errors", [])]
        return cls(target_dataset_id=raw["target_dataset_id"],
                   layer_selector=raw["layer_selector"],
                   metric=raw.get("metric", "cosine"),
                   denominator_mode=raw.get("denominator_mode", "mean"),
                   zero_norm_mode=raw.get("zero_norm_mode", "error"),
                   pca_d_requested=raw["pca_d_requested"],
                   entries=entries, errors=errors,
                   generated_at=raw.get("generated_at", ""),
                   config_digest=raw.get("config_digest", ""))

    def csv_rows(self) -> list[list[Any]]:
        rows = [["rank", "model_id", "layer_id", "sc_score",
                 "degenerate_count", "pca_d_effective"]]
        for e in self.entries:
            rows.append([e.rank, e.model_id, e.layer_id, repr(e.sc_score),
                         e.degenerate_count, e.pca_d_effective])
        return rows


@dataclass
class SweepReport:
    """Per-layer scores for one model, in declared layer order."""

    model_id: str
    target_dataset_id: str
    pca_d_requested: int
    points: list[tuple[str, float]]   # (layer_id, sc_score)

    def to_dict(self) -> dict[str, Any]:
        return {"schema": REPORT_SCHEMA, "kind": "sweep",
                "model_id": self.model_id,
                "target_dataset_id": self.target_dataset_id,
                "pca_d_requested": self.pca_d_requested,
                "points": [{"layer_id": l, "sc_score": s} for l, s in self.points]}

    def csv_rows(self) -> list[list[Any]]:
        return [["layer_id", "sc_score"]] + [[l, repr(s)] for l, s in self.points]


@dataclass
class ModelCurve:
    model_id: str
    points: list[tuple[int, float]]   # (pca_d, sc_score)


@dataclass
class SensitivityReport:
    """Score curves over a grid of reduction dimensionalities."""

    target_dataset_id: str
    layer_selector: str
    d_grid: list[int]
    curves: list[ModelCurve]              # ordered by model_id
    ranking_change_points: list[int]      # grid values where the order flips
    errors: list[ModelFailure] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {"schema": REPORT_SCHEMA, "kind": "sensitivity",
                "target_dataset_id": self.target_dataset_id,
                "layer_selector": self.layer_selector,
                "d_grid": self.d_grid,
                "ranking_change_points": self.ranking_change_points,
                "curves": [{"model_id": c.model_id,
                            "points": [{"pca_d": d, "sc_score": s} for d, s in c.points]}
                           for c in self.curves],
                "errors": [vars(e).copy() for e in self.errors]}

    def csv_rows(self) -> list[list[Any]]:
        rows = [["model_id", "pca_d", "sc_score"]]
        for c in self.curves:
            for d, s in c.points:
                rows.append([c.model_id, d, repr(s)])
        return rows


@dataclass
class AgreementReport:
    """Rank correlation between silhouette scores and reported accuracies."""

    spearman_rho: float
    kendall_tau: float
    pairs: list[tuple[str, float, float]]   # (model_id, sc_score, accuracy)

    def to_dict(self) -> dict[str, Any]:
        return {"schema": REPORT_SCHEMA, "kind": "agreement",
                "spearman_rho": self.spearman_rho,
                "kendall_tau": self.kendall_tau,
                "pairs": [{"model_id": m, "sc_score": s, "accuracy": a}
                          for m, s, a in self.pairs]}

    def csv_rows(self) -> list[list[Any]]:
        return ([["model_id", "sc_score", "accuracy"]]
                + [[m, repr(s), repr(a)] for m, s, a in self.pairs])


def config_digest(fields: dict[str, Any]) -> str:
    """Stable hash of a configuration mapping (order-independent)."""
    blob = json.dumps(fields, sort_keys=True, separators=(",", ":"),
                      default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def resolve_layer(entry: ModelEntry, selector: str) -> LayerRef:
    """Map a layer selector onto one of the model's declared layers.

    Supports a literal layer id, the positional form "#<n>" (0-based index
    into the declared order), and the symbolic "last-dense"/"last" which
    picks the final declared layer.
    """
    if selector in _LAST_ALIASES:
        return entry.layers[-1]
    if selector.startswith("#"):
        try:
            index = int(selector[1:])
        except ValueError:
            raise ResolutionError(f"bad layer index selector {selector!r}") from None
        if index < 0 or index >= len(entry.layers):
            raise ResolutionError(
                f"model {entry.model_id!r} declares {len(entry.layers)} layers; "
                f"selector {selector} is out of range")
        return entry.layers[index]
    ref = entry.layer(selector)
    if ref is None:
        raise ResolutionError(
            f"model {entry.model_id!r} does not declare layer {selector!r}")
    return ref


def _score_embedding(es: EmbeddingSet, d: int, metric: DistanceMetric,
                     denominator: DenominatorMode,
                     zero_norm: ZeroNormMode) -> tuple[float, int, int]:
    projection = pca_fit_transform(es.data, d)
    result = silhouette(projection.reduced, es.labels, metric,
                        denominator=denominator, zero_norm=zero_norm)
    return result.score, result.degenerate_count, projection.effective_d


def _score_model(manifest: ZooManifest, entry: ModelEntry, selector: str,
                 d: int, metric: DistanceMetric, denominator: DenominatorMode,
                 zero_norm: ZeroNormMode) -> ScoreEntry:
    ref = resolve_layer(entry, selector)
    es = read_embedding_file(ref.resolved_path)
    if es.dataset_id != manifest.dataset_id:
        raise ValidationError(
            f"embedding {ref.path} is for dataset {es.dataset_id!r}, "
            f"manifest targets {manifest.dataset_id!r}")
    score, degenerate, d_eff = _score_embedding(es, d, metric, denominator, zero_norm)
    return ScoreEntry(model_id=entry.model_id, layer_id=ref.layer_id,
                      sc_score=score, degenerate_count=degenerate,
                      pca_d_effective=d_eff)


def _sort_and_rank(entries: list[ScoreEntry]) -> list[ScoreEntry]:
    entries.sort(key=lambda e: (-e.sc_score, e.model_id))
    for i, e in enumerate(entries):
        e.rank = i + 1
    return entries


def neural_rank(manifest: ZooManifest, layer: str = LAST_DENSE, d: int = 10,
                metric: DistanceMetric = DistanceMetric.COSINE,
                denominator: DenominatorMode = DenominatorMode.MEAN,
                zero_norm: ZeroNormMode = ZeroNormMode.ERROR,
                jobs: int | None = None,
                digest: str | None = None) -> ScoreReport:
    """Score every model in the zoo and rank them by descending silhouette.

    Per-model failures land in the report's errors list and do not abort
    the rest of the zoo; only a zoo with zero scorable models raises.
    Ties in score break by ascending model_id, so reports are deterministic.
    """
    entries: list[ScoreEntry] = []
    failures: list[ModelFailure] = []

    def work(entry: ModelEntry):
        return _score_model(manifest, entry, layer, d, metric, denominator, zero_norm)

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [(entry, pool.submit(work, entry)) for entry in manifest.models]
        for entry, fut in futures:
            try:
                entries.append(fut.result())
            except (NeuralRankError, OSError) as exc:
                failures.append(ModelFailure(model_id=entry.model_id,
                                             error=type(exc).__name__,
                                             detail=str(exc)))
    if not entries:
        raise EmptyReportError(
            "no model could be scored: "
            + "; ".join(f"{f.model_id}: {f.detail}" for f in failures))

    if digest is None:
        digest = config_digest({
            "manifest": str(manifest.source_path) if manifest.source_path else None,
            "dataset_id": manifest.dataset_id, "layer": layer, "pca_d": d,
            "metric": metric.value, "denominator": denominator.value,
            "zero_norm": zero_norm.value})
    return ScoreReport(target_dataset_id=manifest.dataset_id,
                       layer_selector=layer, metric=metric.value,
                       denominator_mode=denominator.value,
                       zero_norm_mode=zero_norm.value, pca_d_requested=d,
                       entries=_sort_and_rank(entries), errors=failures,
                       generated_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
                       config_digest=digest)


def layer_sweep(manifest: ZooManifest, model_id: str, d: int = 10,
                metric: DistanceMetric = DistanceMetric.COSINE,
                denominator: DenominatorMode = DenominatorMode.MEAN,
                zero_norm: ZeroNormMode = ZeroNormMode.ERROR) -> SweepReport:
    """Score one model at every layer it declares, in declared order."""
    entry = manifest.model(model_id)
    points: list[tuple[str, float]] = []
    for ref in entry.layers:
        es = read_embedding_file(ref.resolved_path)
        score, _, _ = _score_embedding(es, d, metric, denominator, zero_norm)
        points.append((ref.layer_id, score))
    return SweepReport(model_id=model_id, target_dataset_id=manifest.dataset_id,
                       pca_d_requested=d, points=points)


def pca_sensitivity(manifest: ZooManifest, layer: str, d_grid: Sequence[int],
                    metric: DistanceMetric = DistanceMetric.COSINE,
                    denominator: DenominatorMode = DenominatorMode.MEAN,
                    zero_norm: ZeroNormMode = ZeroNormMode.ERROR,
                    jobs: int | None = None) -> SensitivityReport:
    """Score the zoo at each reduction dimensionality in ``d_grid``.

    ``ranking_change_points`` lists the grid values at which the induced
    model ordering differs from the ordering at the previous grid value.
    """
    grid = [int(v) for v in d_grid]
    if not grid:
        raise ValidationError("d_grid: must not be empty")
    if any(v < 1 for v in grid):
        raise ValidationError("d_grid: values must be positive")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValidationError("d_grid: values must be strictly increasing")

    loaded: list[tuple[ModelEntry, EmbeddingSet]] = []
    failures: list[ModelFailure] = []
    for entry in manifest.models:
        try:
            ref = resolve_layer(entry, layer)
            es = read_embedding_file(ref.resolved_path)
            if es.dataset_id != manifest.dataset_id:
                raise ValidationError(
                    f"embedding {ref.path} is for dataset {es.dataset_id!r}, "
                    f"manifest targets {manifest.dataset_id!r}")
            loaded.append((entry, es))
        except (NeuralRankError, OSError) as exc:
            failures.append(ModelFailure(model_id=entry.model_id,
                                         error=type(exc).__name__, detail=str(exc)))

    curves: dict[str, list[tuple[int, float]]] = {e.model_id: [] for e, _ in loaded}
    orderings: list[tuple[str, ...]] = []
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        for d in grid:
            futures = [(entry, pool.submit(_score_embedding, es, d, metric,
                                           denominator, zero_norm))
                       for entry, es in loaded]
            scored: list[tuple[str, float]] = []
            for entry, fut in futures:
                score, _, _ = fut.result()
                curves[entry.model_id].append((d, score))
                scored.append((entry.model_id, score))
            scored.sort(key=lambda p: (-p[1], p[0]))
            orderings.append(tuple(m for m, _ in scored))
    if not loaded:
        raise EmptyReportError(
            "no model could be scored: "
            + "; ".join(f"{f.model_id}: {f.detail}" for f in failures))

    change_points = [grid[i] for i in range(1, len(grid))
                     if orderings[i] != orderings[i - 1]]
    curve_list = [ModelCurve(model_id=m, points=curves[m]) for m in sorted(curves)]
    return SensitivityReport(target_dataset_id=manifest.dataset_id,
                             layer_selector=layer, d_grid=grid,
                             curves=curve_list,
                             ranking_change_points=change_points,
                             errors=failures)


def rank_accuracy_agreement(report: ScoreReport,
                            manifest: ZooManifest) -> AgreementReport:
    """Spearman/Kendall agreement between score ranks and accuracy ranks.

    Only models carrying a reported accuracy participate; ties are handled
    by average ranks.
    """
    accuracy = {m.model_id: m.accuracy for m in manifest.models
                if m.accuracy is not None}
    pairs = [(e.model_id, e.sc_score, accuracy[e.model_id])
             for e in report.entries if e.model_id in accuracy]
    if len(pairs) < 2:
        raise ValidationError(
            f"need at least 2 models with reported accuracy, got {len(pairs)}")
    scores = np.array([p[1] for p in pairs])
    accs = np.array([p[2] for p in pairs])
    rho = float(stats.spearmanr(scores, accs).statistic)
    tau = float(stats.kendalltau(scores, accs).statistic)
    return AgreementReport(spearman_rho=rho, kendall_tau=tau, pairs=pairs)


def viz_export(es: EmbeddingSet, metric: DistanceMetric, out: BinaryIO) -> None:
    """Write a 3-component PCA of the embedding as CSV rows (x, y, z, label).

    ``metric`` is accepted for interface symmetry with the scoring
    operations; the exported coordinates do not depend on it. When the
    data has fewer than 3 usable components the missing columns are zero.
    """
    del metric
    projection = pca_fit_transform(es.data, 3)
    coords = np.zeros((es.rows, 3), dtype=np.float64)
    coords[:, :projection.effective_d] = projection.reduced
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "y", "z", "label"])
    for row, label in zip(coords, es.labels):
        writer.writerow([repr(float(row[0])), repr(float(row[1])),
                         repr(float(row[2])), int(label)])
    out.write(buf.getvalue().encode("utf-8"))
