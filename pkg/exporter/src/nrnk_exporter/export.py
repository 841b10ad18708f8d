"""Run a target dataset through a trained torch model and capture activations.

Capture points are module names as reported by ``named_modules()`` (for an
``nn.Sequential`` those are "0", "1", ...), plus the special name "input"
which captures the preprocessed inputs themselves. Activations with
spatial axes are flattened row-major, so the exported width is the
product of all non-batch axes.

Models must be full pickled ``nn.Module`` objects (``torch.save(model)``);
TorchScript archives are not supported because submodule forward hooks do
not fire inside a compiled graph. Loading unpickles arbitrary code, so
only export models you trust.

Inference runs in eval mode with gradients off; given fixed weights and
input order the exported bytes are identical across runs. Batch size only
affects throughput, which the export verifies on a two-batch spot check.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .nrnk import ExportError, nrnk_bytes

logger = logging.getLogger(__name__)

INPUT_CAPTURE = "input"
BATCH_CHECK_TOLERANCE = 1e-6


@dataclass
class ExportSpec:
    model_path: Path
    data_path: Path            # .npz archive with arrays "x" and "y"
    capture_points: list[str]  # module names, or "input"
    dataset_id: str
    model_id: str
    output_dir: Path
    batch_size: int = 64
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.model_path = Path(self.model_path)
        self.data_path = Path(self.data_path)
        self.output_dir = Path(self.output_dir)
        if not self.capture_points:
            raise ExportError("at least one capture point is required")
        if len(set(self.capture_points)) != len(self.capture_points):
            raise ExportError("capture points must be unique")
        if self.batch_size < 1:
            raise ExportError(f"batch size must be positive, got {self.batch_size}")


def load_model(path: Path) -> torch.nn.Module:
    try:
        model = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise ExportError(f"cannot load model {path}: {exc}") from exc
    if not isinstance(model, torch.nn.Module):
        raise ExportError(f"{path} did not contain an nn.Module, got {type(model).__name__}")
    if isinstance(model, torch.jit.ScriptModule):
        raise ExportError(
            "TorchScript archives are not supported; save the model with "
            "torch.save(model) instead")
    model.eval()
    return model


def load_dataset(path: Path) -> tuple[torch.Tensor, np.ndarray]:
    archive = np.load(path)
    if "x" not in archive or "y" not in archive:
        raise ExportError(f"{path} must contain arrays 'x' and 'y'")
    x = torch.from_numpy(np.asarray(archive["x"], dtype=np.float32))
    y = np.asarray(archive["y"], dtype=np.int64)
    if y.ndim != 1 or len(y) != x.shape[0]:
        raise ExportError(
            f"label count {y.shape} does not align with {x.shape[0]} inputs")
    return x, y


def _flatten(t: torch.Tensor) -> np.ndarray:
    return t.detach().contiguous().reshape(t.shape[0], -1).cpu().numpy().astype(np.float32)


def _run_batches(model: torch.nn.Module, x: torch.Tensor, batch_size: int,
                 capture_points: list[str]) -> dict[str, np.ndarray]:
    module_points = [p for p in capture_points if p != INPUT_CAPTURE]
    modules = dict(model.named_modules())
    unknown = [p for p in module_points if p not in modules]
    if unknown:
        available = sorted(name for name in modules if name)
        raise ExportError(
            f"capture point(s) {', '.join(repr(p) for p in unknown)} not found; "
            f"available layers: {', '.join(available)}")

    captured: dict[str, list[np.ndarray]] = {p: [] for p in capture_points}
    handles = []

    def make_hook(point):
        def hook(_module, _inputs, output):
            if not isinstance(output, torch.Tensor):
                raise ExportError(f"capture point {point!r} did not produce a tensor")
            captured[point].append(_flatten(output))
        return hook

    for point in module_points:
        handles.append(modules[point].register_forward_hook(make_hook(point)))
    try:
        with torch.no_grad():
            for start in range(0, x.shape[0], batch_size):
                batch = x[start:start + batch_size]
                if INPUT_CAPTURE in captured:
                    captured[INPUT_CAPTURE].append(_flatten(batch))
                model(batch)
    finally:
        for handle in handles:
            handle.remove()

    out = {p: np.concatenate(chunks, axis=0) for p, chunks in captured.items()}
    for point, matrix in out.items():
        if matrix.shape[0] != x.shape[0]:
            raise ExportError(
                f"capture point {point!r} produced {matrix.shape[0]} rows for "
                f"{x.shape[0]} inputs (module invoked zero or multiple times per pass)")
    return out


def _spot_check_batch_invariance(model, x, batch_size, capture_points,
                                 batched: dict[str, np.ndarray]) -> None:
    head = min(2 * batch_size, x.shape[0])
    if head <= batch_size:
        return  # a single batch covered everything
    single = _run_batches(model, x[:head], head, capture_points)
    for point, matrix in single.items():
        diff = float(np.max(np.abs(matrix - batched[point][:head])))
        if diff > BATCH_CHECK_TOLERANCE:
            raise ExportError(
                f"batching changed {point!r} activations by {diff:.2e}; "
                f"export aborted")


def export_activations(spec: ExportSpec) -> Path:
    """Export every capture point to NRNK and write a single-model manifest.

    Returns the manifest path. Output bytes depend only on the model
    weights, the dataset, and the spec.
    """
    model = load_model(spec.model_path)
    x, y = load_dataset(spec.data_path)
    captured = _run_batches(model, x, spec.batch_size, spec.capture_points)
    _spot_check_batch_invariance(model, x, spec.batch_size,
                                 spec.capture_points, captured)

    spec.output_dir.mkdir(parents=True, exist_ok=True)
    layers = []
    for point in spec.capture_points:
        matrix = captured[point]
        fname = f"{spec.model_id}_{point.replace('.', '-') or 'root'}.nrnk"
        blob = nrnk_bytes(model_id=spec.model_id, layer_id=point,
                          dataset_id=spec.dataset_id, data=matrix, labels=y,
                          metadata=spec.metadata or None)
        (spec.output_dir / fname).write_bytes(blob)
        layers.append({"layer_id": point, "dims": int(matrix.shape[1]),
                       "path": fname})
        logger.info("wrote %s (%d x %d)", fname, matrix.shape[0], matrix.shape[1])

    manifest = {
        "dataset_id": spec.dataset_id,
        "models": [{"model_id": spec.model_id, "layers": layers,
                    "metadata": dict(spec.metadata)}],
    }
    manifest_path = spec.output_dir / f"{spec.model_id}_manifest.json"
    manifest_path.write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return manifest_path
