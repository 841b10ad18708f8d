"""Activation file format (NRNK) and zoo manifest loading.

NRNK container layout, version 1:

    bytes 0..3    magic, ASCII "NRNK"
    bytes 4..7    format version, little-endian u32 (= 1)
    bytes 8..11   header length H, little-endian u32
    bytes 12..12+H UTF-8 JSON header
    remainder     rows * dims float32 values, little endian, row major

The JSON header carries the required keys ``model_id``, ``layer_id``,
``dataset_id``, ``rows``, ``dims``, ``dtype`` (fixed to ``"f32le"``) and
``labels`` (array of ``rows`` non-negative integers), plus an optional
``metadata`` object. Writing is deterministic: the header is serialized
with sorted keys and no whitespace, so the same set always produces
byte-identical files.

The zoo manifest is a JSON file::

    {"dataset_id": ..., "models": [
        {"model_id": ..., "layers": [{"layer_id": ..., "dims": ..., "path": ...}],
         "metadata": {...}, "accuracy": 0.94}, ...]}

Layer paths are resolved relative to the manifest's directory.
"""
from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, BinaryIO

import numpy as np

from .errors import (
    FormatError,
    ResolutionError,
    TruncationError,
    ValidationError,
)

MAGIC = b"NRNK"
FORMAT_VERSION = 1
_FIXED_HEADER = struct.Struct("<4sII")  # magic, version, header length
_REQUIRED_KEYS = ("model_id", "layer_id", "dataset_id", "rows", "dims",
                  "dtype", "labels")


@dataclass(eq=False)
class EmbeddingSet:
    """One model-layer's activation matrix for a labeled target dataset.

    ``data`` is a rows x dims float32 matrix; row i is the activation
    vector sample i produced at the exported layer. ``labels`` holds the
    per-row class ids of the target dataset.
    """

    model_id: str
    layer_id: str
    dataset_id: str
    data: np.ndarray
    labels: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)

    @property
    def rows(self) -> int:
        return int(self.data.shape[0])

    @property
    def dims(self) -> int:
        return int(self.data.shape[1]) if self.data.ndim == 2 else 0

    def validate(self) -> None:
        """Check every invariant; raises ValidationError naming the field."""
        if self.data.ndim != 2:
            raise ValidationError(f"data: expected a 2-d matrix, got ndim={self.data.ndim}")
        if self.rows < 2:
            raise ValidationError(f"rows: need at least 2 samples, got {self.rows}")
        if self.dims < 1:
            raise ValidationError(f"dims: need at least 1 dimension, got {self.dims}")
        if self.labels.ndim != 1 or len(self.labels) != self.rows:
            raise ValidationError(
                f"labels: length {len(self.labels)} does not match rows {self.rows}")
        if np.any(self.labels < 0):
            bad = int(np.flatnonzero(self.labels < 0)[0])
            raise ValidationError(f"labels: negative class id at index {bad}")
        if len(np.unique(self.labels)) < 2:
            raise ValidationError("labels: fewer than 2 classes present")
        if not np.all(np.isfinite(self.data)):
            r, c = np.argwhere(~np.isfinite(self.data))[0]
            raise ValidationError(f"data: non-finite value at ({int(r)}, {int(c)})")
        if not isinstance(self.metadata, dict):
            raise ValidationError("metadata: expected a JSON object")

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingSet):
            return NotImplemented
        return (self.model_id == other.model_id
                and self.layer_id == other.layer_id
                and self.dataset_id == other.dataset_id
                and self.metadata == other.metadata
                and self.data.shape == other.data.shape
                and self.data.tobytes() == other.data.tobytes()
                and np.array_equal(self.labels, other.labels))


def write_embedding_set(es: EmbeddingSet, sink: BinaryIO) -> None:
    """Serialize a validated EmbeddingSet to ``sink`` in NRNK v1 format."""
    es.validate()
    header: dict[str, Any] = {
        "model_id": es.model_id,
        "layer_id": es.layer_id,
        "dataset_id": es.dataset_id,
        "rows": es.rows,
        "dims": es.dims,
        "dtype": "f32le",
        "labels": [int(v) for v in es.labels],
    }
    if es.metadata:
        header["metadata"] = es.metadata
    header_bytes = json.dumps(header, sort_keys=True,
                              separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    sink.write(_FIXED_HEADER.pack(MAGIC, FORMAT_VERSION, len(header_bytes)))
    sink.write(header_bytes)
    sink.write(np.ascontiguousarray(es.data, dtype="<f4").tobytes())


def read_embedding_set(source: BinaryIO) -> EmbeddingSet:
    """Parse and validate an NRNK v1 stream; rejects malformed input."""
    fixed = source.read(_FIXED_HEADER.size)
    if len(fixed) < _FIXED_HEADER.size:
        raise TruncationError(
            f"file ends at byte {len(fixed)}, before the {_FIXED_HEADER.size}-byte fixed header",
            expected_bytes=_FIXED_HEADER.size, actual_bytes=len(fixed))
    magic, version, header_len = _FIXED_HEADER.unpack(fixed)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}, expected {FORMAT_VERSION}")
    header_bytes = source.read(header_len)
    if len(header_bytes) < header_len:
        raise TruncationError(
            f"header truncated at byte {_FIXED_HEADER.size + len(header_bytes)}, "
            f"declared header length is {header_len}",
            expected_bytes=_FIXED_HEADER.size + header_len,
            actual_bytes=_FIXED_HEADER.size + len(header_bytes))
    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"header is not valid UTF-8 JSON: {exc}") from exc
    if not isinstance(header, dict):
        raise FormatError("header JSON must be an object")
    missing = [k for k in _REQUIRED_KEYS if k not in header]
    if missing:
        raise FormatError(f"header missing required keys: {', '.join(missing)}")
    if header["dtype"] != "f32le":
        raise FormatError(f"unsupported dtype {header['dtype']!r}, expected 'f32le'")
    rows, dims = header["rows"], header["dims"]
    if not isinstance(rows, int) or not isinstance(dims, int):
        raise FormatError("header rows/dims must be integers")
    labels = header["labels"]
    if not isinstance(labels, list) or not all(isinstance(v, int) for v in labels):
        raise FormatError("header labels must be an array of integers")
    if len(labels) != rows:
        raise ValidationError(
            f"labels: length {len(labels)} does not match rows {rows}")

    payload = source.read()
    expected = rows * dims * 4
    if len(payload) != expected:
        data_start = _FIXED_HEADER.size + header_len
        raise TruncationError(
            f"payload of {len(payload)} bytes at offset {data_start} does not match "
            f"declared rows*dims*4 = {expected} bytes (file should end at byte "
            f"{data_start + expected}, ends at {data_start + len(payload)})",
            expected_bytes=data_start + expected,
            actual_bytes=data_start + len(payload))
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, dims).copy()

    es = EmbeddingSet(
        model_id=str(header["model_id"]),
        layer_id=str(header["layer_id"]),
        dataset_id=str(header["dataset_id"]),
        data=data,
        labels=np.asarray(labels, dtype=np.int64),
        metadata=header.get("metadata", {}),
    )
    es.validate()
    es.data.setflags(write=False)
    es.labels.setflags(write=False)
    return es


def write_embedding_file(es: EmbeddingSet, path: str | Path) -> None:
    buf = io.BytesIO()
    write_embedding_set(es, buf)
    Path(path).write_bytes(buf.getvalue())


def read_embedding_file(path: str | Path) -> EmbeddingSet:
    with open(path, "rb") as fh:
        return read_embedding_set(fh)


@dataclass
class LayerRef:
    """A layer exported by a model: id, activation width, and file path."""

    layer_id: str
    dims: int
    path: str
    resolved_path: Path | None = None


@dataclass
class ModelEntry:
    """One model in the zoo: ordered layer list plus free-form metadata.

    The layer order is the network's own layer order, index 0 being the
    input-most capture point. ``accuracy``, when present, is the model's
    reported accuracy on the target dataset as a fraction in [0, 1].
    """

    model_id: str
    layers: list[LayerRef]
    metadata: dict = field(default_factory=dict)
    accuracy: float | None = None

    def layer(self, layer_id: str) -> LayerRef | None:
        for ref in self.layers:
            if ref.layer_id == layer_id:
                return ref
        return None


@dataclass
class ZooManifest:
    """Catalog of candidate models and their exported layers."""

    dataset_id: str
    models: list[ModelEntry]
    source_path: Path | None = None

    def model(self, model_id: str) -> ModelEntry:
        for entry in self.models:
            if entry.model_id == model_id:
                return entry
        raise ResolutionError(f"model {model_id!r} is not in the manifest")


def load_manifest(path: str | Path, require_files: bool = True) -> ZooManifest:
    """Load and validate a zoo manifest.

    Resolves each layer path relative to the manifest's directory. With
    ``require_files`` (the default), every referenced embedding file must
    exist; passing False skips the existence check, which is useful when
    only model metadata such as accuracies is needed.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: manifest is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "dataset_id" not in raw or "models" not in raw:
        raise FormatError(f"{path}: manifest must be an object with dataset_id and models")
    models_raw = raw["models"]
    if not isinstance(models_raw, list) or not models_raw:
        raise ValidationError(f"{path}: models list is empty")

    base = path.parent
    seen: set[str] = set()
    models: list[ModelEntry] = []
    missing: list[str] = []
    for m in models_raw:
        model_id = m.get("model_id")
        if not isinstance(model_id, str) or not model_id:
            raise ValidationError(f"{path}: every model needs a non-empty model_id")
        if model_id in seen:
            raise ValidationError(f"{path}: duplicate model_id {model_id!r}")
        seen.add(model_id)
        layers_raw = m.get("layers")
        if not isinstance(layers_raw, list) or not layers_raw:
            raise ValidationError(f"{path}: model {model_id!r} declares no layers")
        layers: list[LayerRef] = []
        for lr in layers_raw:
            layer_id, dims, rel = lr.get("layer_id"), lr.get("dims"), lr.get("path")
            if not isinstance(layer_id, str) or not layer_id:
                raise ValidationError(f"{path}: model {model_id!r} has a layer without layer_id")
            if not isinstance(dims, int) or dims < 1:
                raise ValidationError(
                    f"{path}: model {model_id!r} layer {layer_id!r} has invalid dims {dims!r}")
            if not isinstance(rel, str) or not rel:
                raise ValidationError(
                    f"{path}: model {model_id!r} layer {layer_id!r} has no path")
            resolved = (base / rel).resolve()
            if require_files and not resolved.is_file():
                missing.append(f"{model_id}/{layer_id} -> {rel}")
            layers.append(LayerRef(layer_id=layer_id, dims=dims, path=rel,
                                   resolved_path=resolved))
        accuracy = m.get("accuracy")
        if accuracy is not None:
            if not isinstance(accuracy, (int, float)) or not 0.0 <= float(accuracy) <= 1.0:
                raise ValidationError(
                    f"{path}: model {model_id!r} accuracy {accuracy!r} not in [0, 1]")
            accuracy = float(accuracy)
        metadata = m.get("metadata", {})
        if not isinstance(metadata, dict):
            raise ValidationError(f"{path}: model {model_id!r} metadata must be an object")
        models.append(ModelEntry(model_id=model_id, layers=layers,
                                 metadata=metadata, accuracy=accuracy))
    if missing:
        raise ResolutionError(
            f"{path}: missing embedding files: " + "; ".join(missing))
    return ZooManifest(dataset_id=str(raw["dataset_id"]), models=models,
                       source_path=path)
