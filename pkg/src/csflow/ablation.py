"""Ablation harness comparing scale-usage strategies and block counts.

Variants share one seed and one training config so differences isolate the
architecture: a single-scale flow per chosen level, independent per-scale
flows whose NLLs are summed, channel concatenation after upsampling to the
finest resolution, and the full cross-scale model.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import torch

from .errors import AblationError, InvariantViolation
from .flow.api import build_model, forward_batch
from .flow.config import FlowConfig, default_kernel_sizes
from .metrics import auroc
from .pyramid import FeaturePyramid, split_dataset
from .training import TrainConfig, train

VARIANTS = ("cross_scale", "single_scale", "separate_multi_scale", "concat_multi_scale")


@dataclass
class AblationSpec:
    variant: str
    scale_index: int | None = None  # single_scale only
    block_counts: list[int] = field(default_factory=list)  # empty = use flow_cfg default

    def validate(self, num_scales):
        if self.variant not in VARIANTS:
            raise InvariantViolation(f"unknown ablation variant {self.variant!r}")
        if self.variant == "single_scale":
            if self.scale_index is None or not 0 <= self.scale_index < num_scales:
                raise InvariantViolation(
                    f"single_scale needs a scale index in [0, {num_scales}), got {self.scale_index}"
                )
        elif self.scale_index is not None:
            raise InvariantViolation(f"{self.variant} takes no scale index")
        for count in self.block_counts:
            if count < 1:
                raise InvariantViolation(f"block count must be >= 1, got {count}")
        return self

    def label(self):
        if self.variant == "single_scale":
            return f"single_scale({self.scale_index})"
        return self.variant


def _single_scale_config(flow_cfg: FlowConfig, channels, num_blocks) -> FlowConfig:
    return FlowConfig(
        num_scales=1,
        channels=channels,
        num_blocks=num_blocks,
        kernel_sizes=default_kernel_sizes(num_blocks),
        clamp_alpha=flow_cfg.clamp_alpha,
        hidden_channel_factor=flow_cfg.hidden_channel_factor,
        leaky_slope=flow_cfg.leaky_slope,
        seed=flow_cfg.seed,
    )


def _take_scale(samples, index):
    return [[np.asarray(p.scales[index] if isinstance(p, FeaturePyramid) else p[index])]
            for p in samples]


def _concat_to_finest(samples):
    """Bilinearly upsample every level to the finest grid, stack channels."""
    merged = []
    for sample in samples:
        scales = sample.scales if isinstance(sample, FeaturePyramid) else sample
        target = scales[0].shape[1:]
        layers = [np.asarray(scales[0], dtype=np.float64)]
        for coarse in scales[1:]:
            tensor = torch.from_numpy(np.asarray(coarse, dtype=np.float64))[None]
            up = torch.nn.functional.interpolate(
                tensor, size=target, mode="bilinear", align_corners=False
            )
            layers.append(up[0].numpy())
        merged.append([np.concatenate(layers, axis=0)])
    return merged


def _scores_nll(model, samples):
    latent = forward_batch(model, samples)
    return latent.z_norm_squared() / 2.0 - latent.logdet


def _train_and_score(flow_cfg, train_cfg, train_samples, test_samples):
    model = build_model(flow_cfg)
    train(model, train_samples, train_cfg)
    return _scores_nll(model, test_samples)


def _variant_scores(spec, num_blocks, flow_cfg, train_cfg, train_pyramids, test_pyramids):
    base = replace(flow_cfg, num_blocks=num_blocks, kernel_sizes=default_kernel_sizes(num_blocks))
    if spec.variant == "cross_scale":
        return _train_and_score(base, train_cfg, train_pyramids, test_pyramids)
    if spec.variant == "single_scale":
        cfg = _single_scale_config(flow_cfg, flow_cfg.channels, num_blocks)
        return _train_and_score(
            cfg,
            train_cfg,
            _take_scale(train_pyramids, spec.scale_index),
            _take_scale(test_pyramids, spec.scale_index),
        )
    if spec.variant == "separate_multi_scale":
        total = np.zeros(len(test_pyramids))
        for index in range(flow_cfg.num_scales):
            cfg = _single_scale_config(flow_cfg, flow_cfg.channels, num_blocks)
            total += _train_and_score(
                cfg,
                train_cfg,
                _take_scale(train_pyramids, index),
                _take_scale(test_pyramids, index),
            )
        return total
    cfg = _single_scale_config(flow_cfg, flow_cfg.channels * flow_cfg.num_scales, num_blocks)
    return _train_and_score(
        cfg, train_cfg, _concat_to_finest(train_pyramids), _concat_to_finest(test_pyramids)
    )


def run_ablation(specs, dataset, train_cfg: TrainConfig, flow_cfg: FlowConfig):
    """Train and evaluate every (variant, block count) pair under identical seeds.

    ``dataset`` is the (pyramid, label, split) triple list from load_dataset.
    Returns one report row per pair: variant, num_blocks, auroc, and the mean
    test scores per class.
    """
    if isinstance(specs, AblationSpec):
        specs = [specs]
    train_pyramids, test_pyramids, test_labels = split_dataset(dataset)
    rows = []
    for spec in specs:
        spec.validate(flow_cfg.num_scales)
        counts = spec.block_counts or [flow_cfg.num_blocks]
        for num_blocks in counts:
            try:
                scores = _variant_scores(
                    spec, num_blocks, flow_cfg, train_cfg, train_pyramids, test_pyramids
                )
                value = auroc(scores, test_labels)
            except Exception as exc:
                raise AblationError(
                    f"variant {spec.label()} with {num_blocks} blocks failed: {exc}"
                ) from exc
            flags = np.array([label == "anomalous" for label in test_labels])
            rows.append(
                {
                    "variant": spec.label(),
                    "num_blocks": num_blocks,
                    "auroc": float(value),
                    "mean_score_normal": float(scores[~flags].mean()),
                    "mean_score_anomalous": float(scores[flags].mean()),
                }
            )
    return rows
