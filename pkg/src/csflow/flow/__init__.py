"""Cross-scale normalizing flow: configuration, modules, numpy API, checkpoints."""

from .api import (
    LatentResult,
    build_model,
    check_pyramid_compatible,
    forward,
    forward_batch,
    inverse,
    inverse_batch,
)
from .checkpoint import CHECKPOINT_MAGIC, CHECKPOINT_VERSION, load_checkpoint, save_checkpoint
from .config import FlowConfig, default_kernel_sizes
from .modules import CouplingBlock, CrossScaleFlow, CrossScaleSubnet, soft_clamp

__all__ = [
    "CHECKPOINT_MAGIC",
    "CHECKPOINT_VERSION",
    "CouplingBlock",
    "CrossScaleFlow",
    "CrossScaleSubnet",
    "FlowConfig",
    "LatentResult",
    "build_model",
    "check_pyramid_compatible",
    "default_kernel_sizes",
    "forward",
    "forward_batch",
    "inverse",
    "inverse_batch",
    "load_checkpoint",
    "save_checkpoint",
    "soft_clamp",
]
