"""Synthetic dataset generator for desk-scale testing of the detection pipeline.

Normal samples are smooth correlated random fields: per-channel white noise
blurred with a fixed 5-tap binomial kernel along each axis at the finest
scale; coarser scales are 2x average-pooled views of the same field, so the
pyramid is coherent across scales. Anomalous samples add a localized Gaussian
bump (same profile in every channel) at a random position, injected at every
scale with position and radius divided by the scale factor.

``anomaly_amplitude`` is expressed in units of the theoretical field standard
deviation (FIELD_STD below), so amplitude 5.0 means a bump five sigma above
the surrounding texture.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d

from .errors import InvariantViolation
from .pyramid import DatasetManifest, FeaturePyramid, ManifestEntry, write_pyramid

BLUR_KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0

# Variance of blur(unit white noise) is (sum k^2)^2; sum k^2 = 70/256.
FIELD_STD = float(np.sum(BLUR_KERNEL**2))


@dataclass
class SyntheticConfig:
    num_normal: int = 96
    num_anomalous: int = 32
    num_scales: int = 2
    channels: int = 8
    base_height: int = 16
    base_width: int = 16
    anomaly_amplitude: float = 5.0
    anomaly_radius: float = 2.0
    seed: int = 0
    num_test_normal: int | None = None  # default: min(num_anomalous, num_normal // 2)
    class_name: str = "synthetic"

    def validate(self):
        if self.num_normal < 1:
            raise InvariantViolation("need at least one normal sample")
        if self.num_anomalous < 0:
            raise InvariantViolation("num_anomalous must be >= 0")
        if self.num_scales < 1:
            raise InvariantViolation("num_scales must be >= 1")
        if self.channels < 2 or self.channels % 2 != 0:
            raise InvariantViolation(f"channels must be a positive even number, got {self.channels}")
        factor = 2 ** (self.num_scales - 1)
        if self.base_height % factor or self.base_width % factor:
            raise InvariantViolation(
                f"base dims {self.base_height}x{self.base_width} must be divisible by {factor} "
                f"for {self.num_scales} halving scales"
            )
        if self.base_height // factor < 1 or self.base_width // factor < 1:
            raise InvariantViolation("coarsest scale would be empty")
        if self.anomaly_radius <= 0:
            raise InvariantViolation("anomaly_radius must be positive")
        return self

    def test_normal_count(self):
        if self.num_test_normal is not None:
            return min(self.num_test_normal, self.num_normal)
        return min(self.num_anomalous, self.num_normal // 2)


def _smooth_field(rng, channels, height, width):
    noise = rng.standard_normal((channels, height, width))
    blurred = convolve1d(noise, BLUR_KERNEL, axis=1, mode="reflect")
    blurred = convolve1d(blurred, BLUR_KERNEL, axis=2, mode="reflect")
    return blurred


def _avg_pool2(field):
    c, h, w = field.shape
    return field.reshape(c, h // 2, 2, w // 2, 2).mean(axis=(2, 4))


def _bump_profile(height, width, row, col, sigma):
    ii = np.arange(height)[:, None]
    jj = np.arange(width)[None, :]
    d2 = (ii - row) ** 2 + (jj - col) ** 2
    return np.exp(-d2 / (2.0 * sigma * sigma))


def _normal_pyramid(rng, cfg):
    fine = _smooth_field(rng, cfg.channels, cfg.base_height, cfg.base_width)
    scales = [fine]
    for _ in range(cfg.num_scales - 1):
        scales.append(_avg_pool2(scales[-1]))
    return scales


def _inject_bump(scales, rng, cfg):
    r = cfg.anomaly_radius
    row = float(rng.uniform(r, cfg.base_height - 1 - r))
    col = float(rng.uniform(r, cfg.base_width - 1 - r))
    amp = cfg.anomaly_amplitude * FIELD_STD
    for k, field in enumerate(scales):
        factor = 2**k
        # pixel-center alignment between scales
        row_k = (row + 0.5) / factor - 0.5
        col_k = (col + 0.5) / factor - 0.5
        sigma_k = max(r / 2.0, 1e-6) / factor
        profile = amp * _bump_profile(field.shape[1], field.shape[2], row_k, col_k, sigma_k)
        field += profile[None, :, :]
    return {"row": row, "col": col, "radius": r}


def generate_synthetic(cfg, output_dir):
    """Write a synthetic dataset (CSFP files + manifest.json) and return the manifest.

    Deterministic: identical config (including seed) produces bitwise-identical
    files. Anomalous samples always land in the test split; normals are split
    train/test with the test count taken from the config rule.
    """
    cfg.validate()
    os.makedirs(output_dir, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed)))

    n_test_normal = cfg.test_normal_count()
    n_train_normal = cfg.num_normal - n_test_normal

    entries = []
    for i in range(cfg.num_normal):
        scales = _normal_pyramid(rng, cfg)
        sample_id = f"normal_{i:04d}"
        pyramid = FeaturePyramid([s.astype(np.float32) for s in scales], sample_id=sample_id)
        filename = sample_id + ".csfp"
        write_pyramid(pyramid, os.path.join(output_dir, filename))
        split = "train" if i < n_train_normal else "test"
        entries.append(
            ManifestEntry(
                sample_id=sample_id,
                feature_file_path=filename,
                label="normal",
                split=split,
                class_name=cfg.class_name,
            )
        )

    for i in range(cfg.num_anomalous):
        scales = _normal_pyramid(rng, cfg)
        meta = _inject_bump(scales, rng, cfg)
        sample_id = f"anomalous_{i:04d}"
        pyramid = FeaturePyramid([s.astype(np.float32) for s in scales], sample_id=sample_id)
        filename = sample_id + ".csfp"
        write_pyramid(pyramid, os.path.join(output_dir, filename))
        entries.append(
            ManifestEntry(
                sample_id=sample_id,
                feature_file_path=filename,
                label="anomalous",
                split="test",
                class_name=cfg.class_name,
                anomaly=meta,
            )
        )

    manifest = DatasetManifest(entries=entries)
    manifest_path = os.path.join(output_dir, "manifest.json")
    manifest.save(manifest_path)
    return manifest, manifest_path
