"""PCA reduction of activation matrices before distance scoring.

Distances behave poorly on raw high-dimensional activations, so scoring
runs on the top principal components instead. The fit centers the data
(no whitening, which would rescale axes and change cosine geometry) and
takes the leading right singular vectors of the centered matrix.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

logger = logging.getLogger(__name__)


@dataclass
class PCAProjection:
    """A fitted reduction: centering mean, component basis, projected data.

    ``components`` rows are orthonormal, ordered by descending explained
    variance, with a deterministic sign: each row's largest-magnitude
    entry is non-negative. ``reduced`` equals (data - mean) @ components.T.
    """

    mean: np.ndarray                # length-d column means of the fit data
    components: np.ndarray          # effective_d x d orthonormal rows
    explained_variance: np.ndarray  # length effective_d, non-increasing
    reduced: np.ndarray             # T x effective_d projected coordinates
    requested_d: int

    @property
    def effective_d(self) -> int:
        return int(self.components.shape[0])

    @property
    def clamped(self) -> bool:
        return self.effective_d < self.requested_d


def _apply_sign_convention(components: np.ndarray) -> np.ndarray:
    # Largest-|entry| coordinate of each component made non-negative;
    # ties resolved by the first occurrence.
    for row in components:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return components


def pca_fit_transform(data: np.ndarray, requested_d: int) -> PCAProjection:
    """Fit a PCA on ``data`` and project it to at most ``requested_d`` dims.

    The effective dimensionality is clamped to min(requested_d, T - 1, d,
    numerical rank); a clamp is logged, not an error, so heterogeneous
    layer widths can share one requested value.
    """
    if requested_d < 1:
        raise ValidationError(f"requested_d: must be positive, got {requested_d}")
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValidationError("data: expected a 2-d matrix")
    t, d = data.shape
    if t < 2:
        raise ValidationError(f"rows: need at least 2 samples, got {t}")
    if not np.all(np.isfinite(data)):
        raise ValidationError("data: non-finite values present")

    mean = data.mean(axis=0)
    centered = data - mean
    _, singulars, vt = np.linalg.svd(centered, full_matrices=False)
    if singulars.size and singulars[0] > 0.0:
        tol = singulars[0] * max(t, d) * np.finfo(np.float64).eps
        rank = int(np.count_nonzero(singulars > tol))
    else:
        rank = 0
    effective = min(requested_d, t - 1, d, rank)
    if effective < requested_d:
        logger.warning(
            "requested %d components but only %d are available "
            "(T=%d, d=%d, rank=%d); clamping", requested_d, effective, t, d, rank)

    components = _apply_sign_convention(vt[:effective].copy())
    explained = (singulars[:effective] ** 2) / (t - 1)
    reduced = centered @ components.T
    return PCAProjection(mean=mean, components=components,
                         explained_variance=explained, reduced=reduced,
                         requested_d=requested_d)


def pca_transform(projection: PCAProjection, data: np.ndarray) -> np.ndarray:
    """Project new rows into a fitted space: (data - mean) @ components.T."""
    data = np.asarray(data, dtype=np.float64)
    width = data.shape[-1]
    if width != projection.mean.shape[0]:
        raise ValidationError(
            f"data: width {width} does not match fitted width {projection.mean.shape[0]}")
    return (data - projection.mean) @ projection.components.T
