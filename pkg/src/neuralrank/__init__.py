"""neuralrank: rank pre-trained models for a labeled target dataset by the
cluster quality of their latent-space activations."""

from .errors import (
    DegenerateVectorError,
    EmptyReportError,
    FormatError,
    NeuralRankError,
    ResolutionError,
    TruncationError,
    ValidationError,
)
from .metrics import (
    CentroidSet,
    DenominatorMode,
    DistanceMetric,
    SilhouetteResult,
    ZeroNormMode,
    compute_centroids,
    cosine_distance,
    inter_distance,
    intra_distance,
    silhouette,
)
from .ranker import (
    AgreementReport,
    ScoreReport,
    SensitivityReport,
    SweepReport,
    layer_sweep,
    neural_rank,
    pca_sensitivity,
    rank_accuracy_agreement,
    viz_export,
)
from .reduction import PCAProjection, pca_fit_transform, pca_transform
from .store import (
    EmbeddingSet,
    ModelEntry,
    ZooManifest,
    load_manifest,
    read_embedding_file,
    read_embedding_set,
    write_embedding_file,
    write_embedding_set,
)
from .synth import synth_zoo

__version__ = "0.1.0"

__all__ = [
    "AgreementReport", "CentroidSet", "DegenerateVectorError",
    "DenominatorMode", "DistanceMetric", "EmbeddingSet", "EmptyReportError",
    "FormatError", "ModelEntry", "NeuralRankError", "PCAProjection",
    "ResolutionError", "ScoreReport", "SensitivityReport", "SilhouetteResult",
    "SweepReport", "TruncationError", "ValidationError", "ZeroNormMode",
    "ZooManifest", "compute_centroids", "cosine_distance", "inter_distance",
    "intra_distance", "layer_sweep", "load_manifest", "neural_rank",
    "pca_fit_transform", "pca_sensitivity", "pca_transform",
    "rank_accuracy_agreement", "read_embedding_file", "read_embedding_set",
    "silhouette", "synth_zoo", "viz_export", "write_embedding_file",
    "write_embedding_set",
]
