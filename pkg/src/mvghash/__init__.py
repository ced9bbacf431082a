"""Compact binary hash codes for multi-view graph data.

Pipeline: low-pass graph filtering of attributes, per-view kNN contrastive
learning of a shared embedding with quantization and bit-balance penalties,
adaptive view weighting, sign binarization, Hamming-space retrieval.
"""

from .model import (
    BinaryCodes,
    HyperParams,
    LossBreakdown,
    MultiViewGraphDataset,
    SparseAdjacency,
    TrainState,
    View,
    binarize,
    pack_codes,
    sign_pm1,
    unpack_codes,
    validate_dataset,
)
from .filtering import NormalizedLaplacian, build_laplacian, smooth, smooth_views
from .neighbors import build_knn, build_neighbor_sets
from .losses import (
    bit_balance_grad,
    bit_balance_loss,
    contrastive_grad,
    contrastive_loss,
    objective_and_grad,
    quantization_grad,
    quantization_loss,
    total_grad,
    total_objective,
    update_view_weights,
)
from .train import (
    ABLATION_VARIANTS,
    AdamConfig,
    DivergenceError,
    TrainConfig,
    ablate,
    init_state,
    train,
)
from .retrieval import (
    RetrievalResult,
    evaluation_report,
    hamming,
    map_at_all,
    precision_at,
    rank_all,
)
from .fileio import (
    DatasetManifest,
    InputError,
    dataset_digest,
    load_codes,
    load_dataset,
    load_manifest,
    save_codes,
    write_dataset,
)
from .synthetic import make_block_dataset, sbm_adjacency

__version__ = "0.1.0"

__all__ = [
    "ABLATION_VARIANTS",
    "AdamConfig",
    "BinaryCodes",
    "DatasetManifest",
    "DivergenceError",
    "HyperParams",
    "InputError",
    "LossBreakdown",
    "MultiViewGraphDataset",
    "NormalizedLaplacian",
    "RetrievalResult",
    "SparseAdjacency",
    "TrainConfig",
    "TrainState",
    "View",
    "ablate",
    "binarize",
    "bit_balance_grad",
    "bit_balance_loss",
    "build_knn",
    "build_laplacian",
    "build_neighbor_sets",
    "contrastive_grad",
    "contrastive_loss",
    "dataset_digest",
    "evaluation_report",
    "hamming",
    "init_state",
    "load_codes",
    "load_dataset",
    "load_manifest",
    "make_block_dataset",
    "map_at_all",
    "objective_and_grad",
    "pack_codes",
    "precision_at",
    "quantization_grad",
    "quantization_loss",
    "rank_all",
    "save_codes",
    "sbm_adjacency",
    "sign_pm1",
    "smooth",
    "smooth_views",
    "total_grad",
    "total_objective",
    "train",
    "unpack_codes",
    "update_view_weights",
    "validate_dataset",
    "write_dataset",
]
