"""Cluster-quality scoring of labeled embeddings.

A model that discriminates well maps same-class samples close together and
far from the other classes. That is measured here per sample i as

    s_i = (b_i - a_i) / max(a_i, b_i)

where cohesion ``a_i`` is the mean distance from sample i to the other
samples of its own class, and separation ``b_i`` is the distance from
sample i to the nearest foreign-class centroid. The aggregate score is the
mean of s_i over all samples and lies in [-1, 1].

Cosine distance (1 - cosine similarity, range [0, 2]) is the default
metric; Euclidean is also supported. The full scoring pass costs T^2
distance computations and is evaluated with vectorized per-class blocks.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVectorError, ValidationError

# Added to every norm in ZeroNormMode.EPSILON so zero rows stop erroring.
ZERO_NORM_EPSILON = 1e-12

# Per-class pairwise blocks are evaluated in row chunks of this size to
# bound peak memory at chunk * class_size floats.
_CHUNK_ROWS = 2048


class DistanceMetric(enum.Enum):
    COSINE = "cosine"
    EUCLIDEAN = "euclidean"


class DenominatorMode(enum.Enum):
    """How centroid and cohesion sums are normalized.

    MEAN divides each sum by the number of terms actually summed (class
    size for centroids, same-class-excluding-self count for cohesion).
    LITERAL divides both by the total sample count T instead; it is kept
    for auditability and shrinks values as classes grow imbalanced.
    """

    MEAN = "mean"
    LITERAL = "literal"


class ZeroNormMode(enum.Enum):
    ERROR = "error"
    EPSILON = "epsilon"


@dataclass
class CentroidSet:
    """Per-class mean vectors: row k of ``centroids`` belongs to ``classes[k]``."""

    classes: np.ndarray   # sorted unique class ids, length K
    centroids: np.ndarray  # K x d


@dataclass
class SilhouetteResult:
    score: float              # mean of per_sample, in [-1, 1]
    per_sample: np.ndarray    # length-T vector of s_i values
    degenerate_count: int     # samples where max(a_i, b_i) == 0


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 - cos(u, v), in [0, 2]. Raises on zero-norm input."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise DegenerateVectorError("cosine distance of a zero-norm vector is undefined")
    cos = float(np.dot(u, v)) / (nu * nv)
    return 1.0 - min(1.0, max(-1.0, cos))


def euclidean_distance(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    return float(np.linalg.norm(u - v))


def distance(u: np.ndarray, v: np.ndarray, metric: DistanceMetric) -> float:
    if metric is DistanceMetric.COSINE:
        return cosine_distance(u, v)
    return euclidean_distance(u, v)


def compute_centroids(data: np.ndarray, labels: np.ndarray,
                      denominator: DenominatorMode = DenominatorMode.MEAN) -> CentroidSet:
    """Per-class centroids of ``data`` rows grouped by ``labels``.

    In MEAN mode each centroid is the arithmetic mean of its class's rows;
    LITERAL mode divides each class sum by the total sample count instead.
    """
    data = np.asarray(data, dtype=np.float64)
    labels = np.asarray(labels)
    if data.ndim != 2 or len(labels) != data.shape[0]:
        raise ValidationError("data must be 2-d with one label per row")
    classes, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    if len(classes) < 2:
        raise ValidationError("labels: fewer than 2 classes present")
    sums = np.zeros((len(classes), data.shape[1]), dtype=np.float64)
    np.add.at(sums, inverse, data)
    if denominator is DenominatorMode.MEAN:
        centroids = sums / counts[:, None]
    else:
        centroids = sums / float(data.shape[0])
    return CentroidSet(classes=classes, centroids=centroids)


def intra_distance(i: int, data: np.ndarray, labels: np.ndarray,
                   metric: DistanceMetric = DistanceMetric.COSINE,
                   denominator: DenominatorMode = DenominatorMode.MEAN) -> float:
    """Cohesion a_i: mean distance from sample i to its same-class peers.

    A sample alone in its class gets a_i = 0 (degenerate, not an error).
    """
    data = np.asarray(data, dtype=np.float64)
    labels = np.asarray(labels)
    peers = np.flatnonzero(labels == labels[i])
    peers = peers[peers != i]
    if len(peers) == 0:
        return 0.0
    total = 0.0
    for j in peers:
        total += distance(data[i], data[j], metric)
    if denominator is DenominatorMode.MEAN:
        return total / len(peers)
    return total / data.shape[0]


def inter_distance(i: int, data: np.ndarray, labels: np.ndarray,
                   centroids: CentroidSet,
                   metric: DistanceMetric = DistanceMetric.COSINE) -> float:
    """Separation b_i: distance from sample i to the nearest foreign-class centroid."""
    data = np.asarray(data, dtype=np.float64)
    labels = np.asarray(labels)
    best = None
    for k, c in zip(centroids.classes, centroids.centroids):
        if k == labels[i]:
            continue
        d = distance(data[i], c, metric)
        if best is None or d < best:
            best = d
    if best is None:
        raise ValidationError("need at least 2 classes to compute separation")
    return best


def nearest_foreign_class(i: int, data: np.ndarray, labels: np.ndarray,
                          centroids: CentroidSet,
                          metric: DistanceMetric = DistanceMetric.COSINE) -> tuple[int, float]:
    """The foreign class realizing b_i. Ties go to the smallest class id."""
    data = np.asarray(data, dtype=np.float64)
    labels = np.asarray(labels)
    best_k, best_d = None, None
    for k, c in zip(centroids.classes, centroids.centroids):
        if k == labels[i]:
            continue
        d = distance(data[i], c, metric)
        if best_d is None or d < best_d:
            best_k, best_d = int(k), d
    if best_k is None:
        raise ValidationError("need at least 2 classes to compute separation")
    return best_k, best_d


def _norms(rows: np.ndarray, zero_norm: ZeroNormMode, what: str) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1)
    if zero_norm is ZeroNormMode.EPSILON:
        return norms + ZERO_NORM_EPSILON
    zero = np.flatnonzero(norms == 0.0)
    if len(zero):
        raise DegenerateVectorError(
            f"{what} {int(zero[0])} has zero norm; cosine distance is undefined "
            f"(rerun with zero-norm mode 'epsilon' to score anyway)")
    return norms


def _cohesion(data: np.ndarray, unit_or_raw: np.ndarray, inverse: np.ndarray,
              counts: np.ndarray, metric: DistanceMetric,
              denominator: DenominatorMode,
              sq_norms: np.ndarray | None) -> np.ndarray:
    """Per-sample mean same-class distance via chunked per-class blocks."""
    t = data.shape[0]
    a = np.zeros(t, dtype=np.float64)
    for k in range(len(counts)):
        members = np.flatnonzero(inverse == k)
        m = len(members)
        if m == 1:
            continue  # singleton class: a stays 0, sample is degenerate
        rows = unit_or_raw[members]
        sums = np.zeros(m, dtype=np.float64)
        for start in range(0, m, _CHUNK_ROWS):
            block = rows[start:start + _CHUNK_ROWS]
            n = block.shape[0]
            if metric is DistanceMetric.COSINE:
                dist_block = 1.0 - np.clip(block @ rows.T, -1.0, 1.0)
            else:
                sq = sq_norms[members]
                d2 = sq[start:start + n, None] + sq[None, :] - 2.0 * (block @ rows.T)
                dist_block = np.sqrt(np.clip(d2, 0.0, None))
            dist_block[np.arange(n), start + np.arange(n)] = 0.0
            sums[start:start + n] = dist_block.sum(axis=1)
        if denominator is DenominatorMode.MEAN:
            a[members] = sums / (m - 1)
        else:
            a[members] = sums / t
    return np.maximum(a, 0.0)


def silhouette(data: np.ndarray, labels: np.ndarray,
               metric: DistanceMetric = DistanceMetric.COSINE,
               denominator: DenominatorMode = DenominatorMode.MEAN,
               zero_norm: ZeroNormMode = ZeroNormMode.ERROR) -> SilhouetteResult:
    """Mean silhouette of ``data`` rows under the class grouping ``labels``.

    Args:
        data: T x d activation matrix (any float dtype; computed in float64).
        labels: length-T integer class ids; at least 2 distinct values.
        metric: cosine (default) or euclidean.
        denominator: MEAN normalizes sums by their term counts; LITERAL
            divides by T.
        zero_norm: under cosine, zero-norm rows raise by default; EPSILON
            adds a tiny constant to every norm instead.

    Returns:
        SilhouetteResult with the aggregate score, the per-sample values,
        and the count of degenerate samples (max(a_i, b_i) == 0, scored 0).
    """
    data = np.asarray(data, dtype=np.float64)
    labels = np.asarray(labels)
    if data.ndim != 2:
        raise ValidationError("data: expected a 2-d matrix")
    t = data.shape[0]
    if t < 2:
        raise ValidationError(f"rows: need at least 2 samples, got {t}")
    if labels.ndim != 1 or len(labels) != t:
        raise ValidationError(f"labels: length {len(labels)} does not match rows {t}")
    classes, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    if len(classes) < 2:
        raise ValidationError("labels: fewer than 2 classes present")

    cents = compute_centroids(data, labels, denominator).centroids
    if metric is DistanceMetric.COSINE:
        row_norms = _norms(data, zero_norm, "row")
        unit = data / row_norms[:, None]
        cent_norms = _norms(cents, zero_norm, "centroid of class")
        unit_cents = cents / cent_norms[:, None]
        a = _cohesion(data, unit, inverse, counts, metric, denominator, None)
        b_all = 1.0 - np.clip(unit @ unit_cents.T, -1.0, 1.0)
    else:
        sq = np.einsum("ij,ij->i", data, data)
        a = _cohesion(data, data, inverse, counts, metric, denominator, sq)
        csq = np.einsum("ij,ij->i", cents, cents)
        d2 = sq[:, None] + csq[None, :] - 2.0 * (data @ cents.T)
        b_all = np.sqrt(np.clip(d2, 0.0, None))
    b_all[np.arange(t), inverse] = np.inf
    b = b_all.min(axis=1)

    widest = np.maximum(a, b)
    degenerate = widest == 0.0
    safe = np.where(degenerate, 1.0, widest)
    per_sample = np.where(degenerate, 0.0, (b - a) / safe)
    return SilhouetteResult(score=float(per_sample.mean()),
                            per_sample=per_sample,
                            degenerate_count=int(degenerate.sum()))
