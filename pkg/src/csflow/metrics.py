"""Threshold-free detection metrics: AUROC, ROC curves, score histograms.

AUROC is computed rank-based (Mann-Whitney U with average ranks for ties),
which handles ties exactly; the swept ROC curve is kept for export and its
trapezoidal area agrees with the rank statistic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import rankdata

from .errors import InvariantViolation, UndefinedMetricError

POSITIVE_LABEL = "anomalous"
NEGATIVE_LABEL = "normal"


def _to_arrays(scores, labels=None):
    """Accept ScoreRecord lists, (score, label) pairs, or parallel sequences."""
    if labels is None:
        pairs = []
        for item in scores:
            if hasattr(item, "score"):
                pairs.append((item.score, item.label))
            else:
                value, label = item
                pairs.append((value, label))
        values = np.array([p[0] for p in pairs], dtype=np.float64)
        raw_labels = [p[1] for p in pairs]
    else:
        values = np.asarray(scores, dtype=np.float64)
        raw_labels = list(labels)
        if len(raw_labels) != len(values):
            raise InvariantViolation("scores and labels must have equal length")
    flags = np.empty(len(raw_labels), dtype=bool)
    for i, label in enumerate(raw_labels):
        if label in (POSITIVE_LABEL, 1, True):
            flags[i] = True
        elif label in (NEGATIVE_LABEL, 0, False):
            flags[i] = False
        else:
            raise InvariantViolation(f"unknown label {label!r}")
    if not np.all(np.isfinite(values)):
        raise InvariantViolation("scores must be finite")
    return values, flags


def auroc(scores, labels=None) -> float:
    """Probability that a random anomalous sample outscores a random normal one."""
    values, positive = _to_arrays(scores, labels)
    num_pos = int(positive.sum())
    num_neg = len(positive) - num_pos
    if num_pos == 0 or num_neg == 0:
        raise UndefinedMetricError("AUROC requires both normal and anomalous samples")
    ranks = rankdata(values, method="average")
    u_stat = float(ranks[positive].sum()) - num_pos * (num_pos + 1) / 2.0
    return u_stat / (num_pos * num_neg)


@dataclass
class RocCurve:
    points: list[tuple[float, float]]  # (false_positive_rate, true_positive_rate)
    auroc: float

    def validate(self):
        fprs = [p[0] for p in self.points]
        tprs = [p[1] for p in self.points]
        if self.points[0] != (0.0, 0.0) or self.points[-1] != (1.0, 1.0):
            raise InvariantViolation("ROC curve must run from (0,0) to (1,1)")
        if any(b < a for a, b in zip(fprs, fprs[1:])) or any(b < a for a, b in zip(tprs, tprs[1:])):
            raise InvariantViolation("ROC curve must be monotone non-decreasing")
        if not 0.0 <= self.auroc <= 1.0:
            raise InvariantViolation(f"auroc out of range: {self.auroc}")
        return self


def roc_curve(scores, labels=None) -> RocCurve:
    """Sweep every distinct score as a threshold; ties collapse to one point."""
    values, positive = _to_arrays(scores, labels)
    num_pos = int(positive.sum())
    num_neg = len(positive) - num_pos
    if num_pos == 0 or num_neg == 0:
        raise UndefinedMetricError("ROC requires both normal and anomalous samples")
    order = np.argsort(-values, kind="mergesort")
    sorted_values = values[order]
    sorted_pos = positive[order]
    # keep only the last index of each tied run of scores
    boundaries = np.nonzero(np.diff(sorted_values))[0]
    cut = np.concatenate([boundaries, [len(values) - 1]])
    tps = np.cumsum(sorted_pos)[cut]
    fps = np.cumsum(~sorted_pos)[cut]
    points = [(0.0, 0.0)] + [(fp / num_neg, tp / num_pos) for fp, tp in zip(fps, tps)]
    fprs = np.array([p[0] for p in points])
    tprs = np.array([p[1] for p in points])
    area = float(trapezoid(tprs, fprs))
    return RocCurve(points=points, auroc=area).validate()


@dataclass
class ScoreHistogram:
    edges: np.ndarray  # bins + 1 boundaries
    counts: dict  # class label -> normalized counts (fractions summing to 1 per class)
    clip_max: float | None = None

    def validate(self):
        for label, values in self.counts.items():
            if len(values) != len(self.edges) - 1:
                raise InvariantViolation(f"histogram counts for {label} do not match the bin count")
        return self


def histogram(scores, labels=None, bins=40, clip_max=None) -> ScoreHistogram:
    """Per-class normalized counts; scores above clip_max land in the last bin."""
    if bins < 1:
        raise InvariantViolation(f"bins must be >= 1, got {bins}")
    values, positive = _to_arrays(scores, labels)
    if len(values) == 0:
        raise InvariantViolation("histogram requires at least one score")
    lo = float(values.min())
    hi = float(clip_max) if clip_max is not None else float(values.max())
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    clipped = np.minimum(values, hi)
    counts = {}
    for label, mask in ((NEGATIVE_LABEL, ~positive), (POSITIVE_LABEL, positive)):
        if mask.any():
            raw, _ = np.histogram(clipped[mask], bins=edges)
            counts[label] = raw / mask.sum()
    return ScoreHistogram(edges=edges, counts=counts, clip_max=clip_max).validate()
