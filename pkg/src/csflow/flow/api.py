"""Numpy-facing entry points around the torch flow modules.

The library API accepts feature pyramids as lists of float arrays and returns
latent pyramids plus per-sample Jacobian log-determinants. Torch stays an
implementation detail of this subpackage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..errors import ShapeMismatchError
from ..pyramid import FeaturePyramid
from .config import FlowConfig
from .modules import CrossScaleFlow


@dataclass
class LatentResult:
    """Latent pyramids and log-determinants for a batch of samples."""

    latents: list[list[np.ndarray]]  # per sample, per scale, each (C, H, W)
    logdet: np.ndarray  # (B,)

    @property
    def batch_size(self):
        return len(self.latents)

    def z_norm_squared(self):
        """Squared euclidean norm of each sample's full latent vector."""
        return np.array(
            [sum(float(np.sum(np.square(z, dtype=np.float64))) for z in zs) for zs in self.latents]
        )

    def total_dims(self):
        return int(sum(z.size for z in self.latents[0]))


def build_model(config: FlowConfig) -> CrossScaleFlow:
    config.validate()
    return CrossScaleFlow(config)


def check_pyramid_compatible(config: FlowConfig, pyramid: FeaturePyramid):
    if pyramid.num_scales != config.num_scales:
        raise ShapeMismatchError(
            f"pyramid has {pyramid.num_scales} scales, model expects {config.num_scales}"
        )
    if pyramid.channels != config.channels:
        raise ShapeMismatchError(
            f"pyramid has {pyramid.channels} channels, model expects {config.channels}"
        )


def _scales_of(sample):
    return sample.scales if isinstance(sample, FeaturePyramid) else list(sample)


def pyramids_to_tensors(samples, config: FlowConfig):
    """Stack samples scale-wise into float64 tensors of shape (B, C, H, W)."""
    if not samples:
        raise ShapeMismatchError("empty batch")
    converted = []
    for sample in samples:
        if isinstance(sample, FeaturePyramid):
            check_pyramid_compatible(config, sample)
        converted.append([np.asarray(a, dtype=np.float64) for a in _scales_of(sample)])
    reference = [a.shape for a in converted[0]]
    for scales in converted[1:]:
        if [a.shape for a in scales] != reference:
            raise ShapeMismatchError("samples in a batch must share one shape signature")
    return [
        torch.from_numpy(np.stack([scales[i] for scales in converted]))
        for i in range(len(reference))
    ]


def tensors_to_pyramids(tensors):
    batch = tensors[0].shape[0]
    arrays = [t.detach().cpu().numpy() for t in tensors]
    return [[a[b].copy() for a in arrays] for b in range(batch)]


def forward_batch(model: CrossScaleFlow, samples) -> LatentResult:
    xs = pyramids_to_tensors(samples, model.config)
    with torch.no_grad():
        zs, logdet = model(xs)
    return LatentResult(latents=tensors_to_pyramids(zs), logdet=logdet.numpy().copy())


def forward(model: CrossScaleFlow, sample) -> LatentResult:
    return forward_batch(model, [sample])


def inverse_batch(model: CrossScaleFlow, latents) -> list[list[np.ndarray]]:
    zs = pyramids_to_tensors(latents, model.config)
    with torch.no_grad():
        xs = model.inverse(zs)
    return tensors_to_pyramids(xs)


def inverse(model: CrossScaleFlow, latent_scales) -> list[np.ndarray]:
    return inverse_batch(model, [latent_scales])[0]
