"""priorforge: deterministic synthesis of diverse image priors plus
kNN-ball distribution metrics for judging their spread."""

from .core import (
    MixWeights,
    PriorImage,
    RngStream,
    SemanticMask,
    clamp01,
    derive_stream,
    softmax,
)
from .cutmix import (
    MaskRefineConfig,
    MonochromeSource,
    blur,
    cutmix,
    diverging_filter,
    diverging_map,
    refine_from,
    refine_mask,
    sample_pair,
)
from .formats import FormatError, read_dipe, read_dipf, write_dipe, write_dipf
from .hierarchical import (
    ScalePlan,
    compute_dmax,
    mix_hierarchical,
    mix_planes,
    sample_scale_noise,
    upscale,
)
from .metrics import (
    EmbeddingSet,
    MetricsReport,
    compute_metrics,
    knn_radius,
    load_embeddings,
    save_embeddings,
)
from .pipeline import (
    DatasetManifest,
    ShardInfo,
    SynthesisConfig,
    SYNTHETIC_BUDGET_PRESETS,
    VerificationReport,
    synthesize_dataset,
    synthesize_one,
    verify_dataset,
)
from .transform import (
    TransformParams,
    apply_nonlinear,
    apply_transform,
    crop,
    elastic,
    rotate,
)

__version__ = "0.1.0"

__all__ = [
    "PriorImage",
    "SemanticMask",
    "MixWeights",
    "RngStream",
    "derive_stream",
    "softmax",
    "clamp01",
    "ScalePlan",
    "compute_dmax",
    "sample_scale_noise",
    "upscale",
    "mix_planes",
    "mix_hierarchical",
    "TransformParams",
    "rotate",
    "elastic",
    "crop",
    "apply_transform",
    "apply_nonlinear",
    "MaskRefineConfig",
    "MonochromeSource",
    "diverging_map",
    "diverging_filter",
    "blur",
    "refine_from",
    "refine_mask",
    "cutmix",
    "sample_pair",
    "SynthesisConfig",
    "DatasetManifest",
    "ShardInfo",
    "VerificationReport",
    "SYNTHETIC_BUDGET_PRESETS",
    "synthesize_one",
    "synthesize_dataset",
    "verify_dataset",
    "EmbeddingSet",
    "MetricsReport",
    "knn_radius",
    "compute_metrics",
    "load_embeddings",
    "save_embeddings",
    "FormatError",
    "read_dipf",
    "write_dipf",
    "read_dipe",
    "write_dipe",
    "__version__",
]
