"""Image-level anomaly scores, thresholding, and spatial localization.

Scores grow with anomaly evidence: ``nll`` is the per-dimension normalized
negative log-likelihood, ``z_energy`` drops the log-determinant and averages
squared latent values. Localization maps are channel sums of squares of the
latent per spatial position, so they decompose the z-energy score exactly.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass

import numpy as np
import torch

from .errors import InvariantViolation, NonFiniteError
from .flow.api import forward_batch
from .pyramid import FeaturePyramid, write_csfp_arrays

SCORE_MODES = ("nll", "z_energy")
DEFAULT_QUANTILE = 0.95
_SCORE_BATCH = 16


@dataclass
class ScoreRecord:
    sample_id: str
    score: float
    label: str | None = None

    def validate(self):
        if not np.isfinite(self.score):
            raise NonFiniteError(f"non-finite score for sample {self.sample_id}")
        if self.label not in (None, "normal", "anomalous"):
            raise InvariantViolation(f"bad label {self.label!r} for sample {self.sample_id}")
        return self


@dataclass
class Threshold:
    theta: float
    quantile: float

    def validate(self):
        if not 0.0 < self.quantile < 1.0:
            raise InvariantViolation(f"quantile must lie in (0, 1), got {self.quantile}")
        return self


@dataclass
class LocalizationMap:
    """Per-scale latent energy grids plus one upsampled full-resolution map."""

    scale_maps: list[np.ndarray]
    upsampled: np.ndarray

    def validate(self):
        for grid in [*self.scale_maps, self.upsampled]:
            if grid.ndim != 2:
                raise InvariantViolation("localization grids must be 2-D")
            if grid.size and float(grid.min()) < 0.0:
                raise InvariantViolation("localization entries must be non-negative")
        return self


def _per_sample_scores(latent, mode):
    if mode not in SCORE_MODES:
        raise ValueError(f"unknown score mode {mode!r}; expected one of {SCORE_MODES}")
    dims = latent.total_dims()
    norm_sq = latent.z_norm_squared()
    if mode == "z_energy":
        return norm_sq / (2.0 * dims)
    return (norm_sq / 2.0 - latent.logdet) / dims


def score_batch(model, samples, mode="nll", labels=None):
    """Score a list of pyramids; runs the flow in fixed-size chunks."""
    if labels is not None and len(labels) != len(samples):
        raise InvariantViolation("labels must align one-to-one with samples")
    records = []
    for start in range(0, len(samples), _SCORE_BATCH):
        chunk = samples[start : start + _SCORE_BATCH]
        latent = forward_batch(model, chunk)
        values = _per_sample_scores(latent, mode)
        for offset, (sample, value) in enumerate(zip(chunk, values)):
            index = start + offset
            sample_id = sample.sample_id if isinstance(sample, FeaturePyramid) else str(index)
            label = labels[index] if labels is not None else None
            records.append(ScoreRecord(sample_id, float(value), label).validate())
    return records


def score_sample(model, sample, mode="nll") -> ScoreRecord:
    return score_batch(model, [sample], mode=mode)[0]


def calibrate_threshold(train_scores, q=DEFAULT_QUANTILE) -> Threshold:
    """Empirical q-quantile (linear interpolation) of train-normal scores."""
    values = [r.score if isinstance(r, ScoreRecord) else float(r) for r in train_scores]
    if not values:
        raise ValueError("cannot calibrate a threshold from no scores")
    threshold = Threshold(theta=float(np.quantile(values, q)), quantile=float(q))
    return threshold.validate()


def decide(record, threshold: Threshold) -> str:
    """Anomalous iff score > theta; a tie counts as normal."""
    score = record.score if isinstance(record, ScoreRecord) else float(record)
    return "anomalous" if score > threshold.theta else "normal"


def localize(model, sample, target_size=None) -> LocalizationMap:
    """Channel sum of squares of the latent per position, finest scale upsampled."""
    latent = forward_batch(model, [sample]).latents[0]
    scale_maps = [np.sum(np.square(z, dtype=np.float64), axis=0) for z in latent]
    finest = scale_maps[0]
    if target_size is None:
        target_size = (finest.shape[0], finest.shape[1])
    upsampled = _bilinear_resize(finest, target_size)
    return LocalizationMap(scale_maps=scale_maps, upsampled=upsampled).validate()


def _bilinear_resize(grid, target_size):
    tensor = torch.from_numpy(np.ascontiguousarray(grid, dtype=np.float64))[None, None]
    resized = torch.nn.functional.interpolate(
        tensor, size=tuple(int(v) for v in target_size), mode="bilinear", align_corners=False
    )
    return resized[0, 0].numpy().copy()


def write_localization_csfp(loc_map: LocalizationMap, destination):
    """Store the upsampled map as a one-scale, one-channel CSFP container."""
    write_csfp_arrays([loc_map.upsampled.astype(np.float32)[None]], destination)


def render_pgm(grid) -> bytes:
    """8-bit binary PGM (P5), min-max normalized; a flat map renders black."""
    grid = np.asarray(grid, dtype=np.float64)
    lo, hi = float(grid.min()), float(grid.max())
    if hi > lo:
        scaled = np.round((grid - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(grid)
    height, width = grid.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    return header + scaled.astype(np.uint8).tobytes()


def write_localization_pgm(loc_map: LocalizationMap, destination):
    payload = render_pgm(loc_map.upsampled)
    if hasattr(destination, "write"):
        destination.write(payload)
        return
    path = os.fspath(destination)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def write_scores_csv(records, destination):
    """CSV with header sample_id,score,label; scores printed via repr for round-trips."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["sample_id", "score", "label"])
    for record in records:
        record.validate()
        writer.writerow([record.sample_id, repr(record.score), record.label or ""])
    text = buffer.getvalue()
    if hasattr(destination, "write"):
        destination.write(text)
        return
    path = os.fspath(destination)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def read_scores_csv(source) -> list[ScoreRecord]:
    if hasattr(source, "read"):
        rows = list(csv.reader(source))
    else:
        with open(os.fspath(source), newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    if not rows or rows[0] != ["sample_id", "score", "label"]:
        raise InvariantViolation("scores CSV must start with header sample_id,score,label")
    records = []
    for row in rows[1:]:
        if len(row) != 3:
            raise InvariantViolation(f"malformed scores row: {row!r}")
        sample_id, score, label = row
        records.append(ScoreRecord(sample_id, float(score), label or None).validate())
    return records
