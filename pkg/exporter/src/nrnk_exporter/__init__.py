"""nrnk-exporter: capture per-layer activations of trained torch models
into portable NRNK embedding files."""

from .export import ExportSpec, export_activations, load_dataset, load_model
from .nrnk import ExportError, nrnk_bytes, write_nrnk

__version__ = "0.1.0"

__all__ = ["ExportError", "ExportSpec", "export_activations", "load_dataset",
           "load_model", "nrnk_bytes", "write_nrnk"]
