"""Input validation helpers shared by the estimator and the CLI."""

from __future__ import annotations

import numpy as np

from .errors import InvariantViolation, ShapeMismatchError
from .pyramid import FeaturePyramid


def ensure_pyramid(sample, sample_id="sample") -> FeaturePyramid:
    """Coerce a FeaturePyramid or per-scale array list into a validated pyramid."""
    if isinstance(sample, FeaturePyramid):
        return sample.validate()
    if isinstance(sample, np.ndarray):
        if sample.ndim != 3:
            raise InvariantViolation("a bare array sample must be 3-D (C, H, W)")
        scales = [np.asarray(sample)]
    else:
        scales = [np.asarray(level) for level in sample]
    return FeaturePyramid(scales=scales, sample_id=sample_id).validate()


def check_pyramid_batch(samples) -> list[FeaturePyramid]:
    """Validate every sample and require one shared shape signature."""
    if len(samples) == 0:
        raise InvariantViolation("empty sample batch")
    pyramids = [
        ensure_pyramid(sample, getattr(sample, "sample_id", None) or f"sample_{i:04d}")
        for i, sample in enumerate(samples)
    ]
    signature = pyramids[0].shape_signature()
    for pyramid in pyramids[1:]:
        if pyramid.shape_signature() != signature:
            raise ShapeMismatchError(
                f"sample {pyramid.sample_id} has signature {pyramid.shape_signature()}, "
                f"expected {signature}"
            )
    return pyramids


def batch_signature(samples):
    return check_pyramid_batch(samples)[0].shape_signature()
