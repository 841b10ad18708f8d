"""Synthetic zoo generation with planted class separation.

Stands in for real trained models in tests and demos: each generated
"model" embeds the same T-sample target dataset as per-class Gaussians
whose class centers sit at a controlled distance from each other. Higher
separation level means a strictly higher between/within distance ratio,
so the correct ranking of the generated zoo is known by construction.

Every model exports two layers: L0 holds a shared input embedding
(identical bytes for every model, carrying no class structure) and L1
holds the planted embedding. All randomness is seeded; the same call
produces byte-identical files.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .store import EmbeddingSet, write_embedding_file

INPUT_LAYER = "L0"
PLANTED_LAYER = "L1"


def _planted_embedding(separation: float, classes: int, labels: np.ndarray,
                       dims: int, rng: np.random.Generator) -> np.ndarray:
    # Class centers: random orthonormal directions scaled by the separation
    # level, unit per-axis noise. Pairwise center distance = sep * sqrt(2),
    # so the between/within ratio grows linearly with the level.
    basis, _ = np.linalg.qr(rng.standard_normal((dims, classes)))
    centers = (basis[:, :classes] * separation).T
    return centers[labels] + rng.standard_normal((len(labels), dims))


def synth_zoo(separations: Sequence[float], classes: int, samples: int,
              dims: int, seed: int, out_dir: str | Path,
              dataset_id: str = "synthetic") -> Path:
    """Write a planted-separation zoo to ``out_dir``; returns the manifest path.

    One model per separation level, named m00, m01, ... in the given
    order; each model's metadata records its level.
    """
    seps = [float(s) for s in separations]
    if not seps:
        raise ValidationError("separations: need at least one level")
    if len(set(seps)) != len(seps):
        raise ValidationError("separations: levels must be distinct")
    if any(s < 0 for s in seps):
        raise ValidationError("separations: levels must be non-negative")
    if classes < 2:
        raise ValidationError(f"classes: need at least 2, got {classes}")
    if samples < 2 * classes:
        raise ValidationError(
            f"samples: need at least 2*classes = {2 * classes}, got {samples}")
    if dims < classes:
        raise ValidationError(
            f"dims: need at least as many dims as classes, got {dims} < {classes}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = np.arange(samples) % classes

    input_rng = np.random.default_rng([seed, 0])
    shared_input = input_rng.standard_normal((samples, dims)).astype(np.float32)

    models = []
    for i, sep in enumerate(seps):
        model_id = f"m{i:02d}"
        rng = np.random.default_rng([seed, 1 + i])
        planted = _planted_embedding(sep, classes, labels, dims, rng).astype(np.float32)
        layer_files = ((INPUT_LAYER, shared_input), (PLANTED_LAYER, planted))
        layers = []
        for layer_id, matrix in layer_files:
            fname = f"{model_id}_{layer_id}.nrnk"
            write_embedding_file(
                EmbeddingSet(model_id=model_id, layer_id=layer_id,
                             dataset_id=dataset_id, data=matrix, labels=labels),
                out_dir / fname)
            layers.append({"layer_id": layer_id, "dims": dims, "path": fname})
        models.append({"model_id": model_id, "layers": layers,
                       "metadata": {"separation": sep}})

    manifest_path = out_dir / "zoo.json"
    manifest_path.write_text(
        json.dumps({"dataset_id": dataset_id, "models": models},
                   sort_keys=True, indent=2) + "\n",
        encoding="utf-8")
    return manifest_path
