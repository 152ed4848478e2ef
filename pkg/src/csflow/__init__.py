"""Cross-scale normalizing flow for defect detection on feature pyramids.

Train a bijective flow on defect-free multi-scale feature maps, then score
new samples by their likelihood under a standard normal latent: unlikely
latents mean defects. Localization maps fall out of the latent energies.
"""

from .ablation import AblationSpec, run_ablation
from .errors import (
    AblationError,
    CsflowError,
    InvariantViolation,
    ManifestError,
    NonFiniteError,
    PyramidFormatError,
    ShapeMismatchError,
    TruncatedStreamError,
    UndefinedMetricError,
    UnsupportedVersionError,
)
from .estimator import CrossScaleFlowDetector
from .flow import (
    CrossScaleFlow,
    FlowConfig,
    LatentResult,
    build_model,
    forward,
    forward_batch,
    inverse,
    inverse_batch,
    load_checkpoint,
    save_checkpoint,
    soft_clamp,
)
from .metrics import RocCurve, ScoreHistogram, auroc, histogram, roc_curve
from .pyramid import (
    DatasetManifest,
    FeaturePyramid,
    ManifestEntry,
    load_dataset,
    pyramid_from_bytes,
    pyramid_to_bytes,
    read_csfp_arrays,
    read_pyramid,
    split_dataset,
    write_csfp_arrays,
    write_pyramid,
)
from .scoring import (
    LocalizationMap,
    ScoreRecord,
    Threshold,
    calibrate_threshold,
    decide,
    localize,
    read_scores_csv,
    score_batch,
    score_sample,
    write_scores_csv,
)
from .synthetic import SyntheticConfig, generate_synthetic
from .training import (
    TrainConfig,
    TrainState,
    clip_gradients,
    compute_gradients,
    global_grad_norm,
    nll_loss,
    nll_per_sample,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AblationError",
    "AblationSpec",
    "CrossScaleFlow",
    "CrossScaleFlowDetector",
    "CsflowError",
    "DatasetManifest",
    "FeaturePyramid",
    "FlowConfig",
    "InvariantViolation",
    "LatentResult",
    "LocalizationMap",
    "ManifestEntry",
    "ManifestError",
    "NonFiniteError",
    "PyramidFormatError",
    "RocCurve",
    "ScoreHistogram",
    "ScoreRecord",
    "ShapeMismatchError",
    "SyntheticConfig",
    "Threshold",
    "TrainConfig",
    "TrainState",
    "TruncatedStreamError",
    "UndefinedMetricError",
    "UnsupportedVersionError",
    "auroc",
    "build_model",
    "calibrate_threshold",
    "clip_gradients",
    "compute_gradients",
    "decide",
    "forward",
    "forward_batch",
    "generate_synthetic",
    "global_grad_norm",
    "histogram",
    "inverse",
    "inverse_batch",
    "load_checkpoint",
    "load_dataset",
    "localize",
    "nll_loss",
    "nll_per_sample",
    "pyramid_from_bytes",
    "pyramid_to_bytes",
    "read_csfp_arrays",
    "read_pyramid",
    "read_scores_csv",
    "write_csfp_arrays",
    "roc_curve",
    "run_ablation",
    "save_checkpoint",
    "score_batch",
    "score_sample",
    "soft_clamp",
    "split_dataset",
    "train",
    "write_pyramid",
    "write_scores_csv",
]
