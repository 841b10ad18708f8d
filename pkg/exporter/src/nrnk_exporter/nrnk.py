"""NRNK v1 writer, implemented against the published byte layout.

Layout: 4-byte ASCII magic "NRNK", little-endian u32 version (= 1),
little-endian u32 header length, UTF-8 JSON header with keys model_id,
layer_id, dataset_id, rows, dims, dtype ("f32le") and labels, then
rows * dims little-endian float32 values in row-major order. The header
is serialized with sorted keys and no whitespace so output bytes are a
pure function of the content.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"NRNK"
FORMAT_VERSION = 1


class ExportError(Exception):
    """Any exporter failure: bad spec, missing capture point, bad labels."""


def nrnk_bytes(model_id: str, layer_id: str, dataset_id: str,
               data: np.ndarray, labels: np.ndarray,
               metadata: dict | None = None) -> bytes:
    data = np.asarray(data, dtype="<f4")
    labels = np.asarray(labels, dtype=np.int64)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ExportError(f"activation matrix must be 2-d with >= 2 rows, got {data.shape}")
    if len(labels) != data.shape[0]:
        raise ExportError(
            f"label count {len(labels)} does not match sample count {data.shape[0]}")
    if np.any(labels < 0) or len(np.unique(labels)) < 2:
        raise ExportError("labels must be non-negative with at least 2 distinct classes")
    if not np.all(np.isfinite(data)):
        raise ExportError(f"non-finite activation values in {layer_id}")
    header = {
        "model_id": model_id,
        "layer_id": layer_id,
        "dataset_id": dataset_id,
        "rows": int(data.shape[0]),
        "dims": int(data.shape[1]),
        "dtype": "f32le",
        "labels": [int(v) for v in labels],
    }
    if metadata:
        header["metadata"] = metadata
    blob = json.dumps(header, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False).encode("utf-8")
    return (struct.pack("<4sII", MAGIC, FORMAT_VERSION, len(blob)) + blob
            + np.ascontiguousarray(data).tobytes())


def write_nrnk(path: str | Path, **kw) -> None:
    Path(path).write_bytes(nrnk_bytes(**kw))
