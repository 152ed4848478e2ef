"""Feature pyramid data model, CSFP binary interchange format, and dataset manifests.

CSFP container layout (all integers little-endian):

    magic   4 bytes   b"CSFP"
    version u32       currently 1
    scales  u32       number of scales s, finest first
    per scale:
        channels u32, height u32, width u32
        payload  channels*height*width float32 values,
                 channel-major then row-major

Manifest files are UTF-8 JSON::

    {
      "format_version": 1,
      "entries": [
        {"sample_id": "...", "feature_file_path": "relative/or/absolute.csfp",
         "label": "normal" | "anomalous", "split": "train" | "test",
         "class_name": "..."},
        ...
      ]
    }

Anomalous entries may additionally carry an ``"anomaly"`` object with the
injected bump position (``row``, ``col``, ``radius`` in finest-scale pixels);
readers must tolerate its absence.
"""

from __future__ import annotations

import io
import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvariantViolation,
    ManifestError,
    PyramidFormatError,
    ShapeMismatchError,
    TruncatedStreamError,
    UnsupportedVersionError,
)

CSFP_MAGIC = b"CSFP"
CSFP_VERSION = 1

LABELS = ("normal", "anomalous")
SPLITS = ("train", "test")


@dataclass
class FeaturePyramid:
    """Ordered multi-scale stack of (C, H, W) float32 feature maps, finest first."""

    scales: list[np.ndarray]
    sample_id: str = ""

    def validate(self):
        if len(self.scales) < 1:
            raise InvariantViolation("pyramid needs at least one scale")
        c0 = None
        prev_hw = None
        for k, arr in enumerate(self.scales):
            if arr.ndim != 3:
                raise InvariantViolation(f"scale {k}: expected 3-D (C, H, W) array, got ndim={arr.ndim}")
            c, h, w = arr.shape
            if c <= 0 or h <= 0 or w <= 0:
                raise InvariantViolation(f"scale {k}: non-positive dimension in {arr.shape}")
            if c % 2 != 0:
                raise InvariantViolation(f"scale {k}: channel count {c} must be even for the coupling split")
            if c0 is None:
                c0 = c
            elif c != c0:
                raise InvariantViolation(f"scale {k}: channel count {c} differs from scale 0 ({c0})")
            if prev_hw is not None and (prev_hw[0] != 2 * h or prev_hw[1] != 2 * w):
                raise InvariantViolation(
                    f"scale {k}: spatial dims {h}x{w} must be half of previous {prev_hw[0]}x{prev_hw[1]}"
                )
            prev_hw = (h, w)
            if not np.isfinite(arr).all():
                raise InvariantViolation(f"scale {k}: non-finite values present")
        return self

    @property
    def num_scales(self):
        return len(self.scales)

    @property
    def channels(self):
        return self.scales[0].shape[0]

    def shape_signature(self):
        """Tuple of (C, H, W) per scale; uniform across a valid dataset."""
        return tuple(arr.shape for arr in self.scales)

    def total_dims(self):
        return int(sum(arr.size for arr in self.scales))

    def equals(self, other):
        return (
            self.sample_id == other.sample_id
            and len(self.scales) == len(other.scales)
            and all(a.shape == b.shape and np.array_equal(a, b) for a, b in zip(self.scales, other.scales))
        )


def write_csfp_arrays(scales, destination):
    """Serialize raw (C, H, W) arrays to the CSFP container.

    Container-level only: no domain invariants beyond well-formed 3-D arrays,
    so auxiliary products like single-channel localization maps can use the
    same format. Model inputs go through write_pyramid instead.
    """
    if len(scales) < 1:
        raise InvariantViolation("CSFP container needs at least one scale")
    payload = bytearray()
    payload += CSFP_MAGIC
    payload += struct.pack("<II", CSFP_VERSION, len(scales))
    for k, arr in enumerate(scales):
        arr = np.asarray(arr)
        if arr.ndim != 3 or min(arr.shape) <= 0:
            raise InvariantViolation(f"scale {k}: expected non-empty 3-D (C, H, W) array")
        c, h, w = arr.shape
        payload += struct.pack("<III", c, h, w)
        payload += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    if hasattr(destination, "write"):
        destination.write(bytes(payload))
    else:
        tmp = str(destination) + ".tmp"
        with open(tmp, "wb") as fh:
            fh.write(bytes(payload))
        os.replace(tmp, str(destination))


def write_pyramid(pyramid, destination):
    """Serialize a pyramid to the CSFP format.

    ``destination`` is a path or a binary file object. The pyramid is
    validated first; nothing is written on invariant failure.
    """
    pyramid.validate()
    write_csfp_arrays(pyramid.scales, destination)


def _read_exact(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise TruncatedStreamError(f"stream ended while reading {what} ({len(data)}/{n} bytes)")
    return data


def read_csfp_arrays(source):
    """Parse a CSFP container into raw arrays; structural checks only."""
    if hasattr(source, "read"):
        return _read_csfp_stream(source)
    with open(source, "rb") as fh:
        return _read_csfp_stream(fh)


def _read_csfp_stream(fh):
    magic = _read_exact(fh, 4, "magic")
    if magic != CSFP_MAGIC:
        raise PyramidFormatError(f"bad magic {magic!r}, expected {CSFP_MAGIC!r}")
    version, num_scales = struct.unpack("<II", _read_exact(fh, 8, "header"))
    if version != CSFP_VERSION:
        raise UnsupportedVersionError(f"unsupported CSFP version {version}")
    if num_scales < 1:
        raise PyramidFormatError("scale count must be >= 1")
    scales = []
    for k in range(num_scales):
        c, h, w = struct.unpack("<III", _read_exact(fh, 12, f"scale {k} header"))
        count = c * h * w
        raw = _read_exact(fh, 4 * count, f"scale {k} payload")
        arr = np.frombuffer(raw, dtype="<f4").reshape(c, h, w).copy()
        scales.append(arr)
    return scales


def read_pyramid(source, sample_id=None):
    """Deserialize a CSFP stream into a validated FeaturePyramid.

    ``source`` is a path or a binary file object. When ``sample_id`` is None
    and the source is a path, the file stem is used.
    """
    if sample_id is None and not hasattr(source, "read"):
        sample_id = os.path.splitext(os.path.basename(str(source)))[0]
    scales = read_csfp_arrays(source)
    pyramid = FeaturePyramid(scales=scales, sample_id=sample_id or "")
    pyramid.validate()
    return pyramid


def pyramid_from_bytes(data, sample_id=""):
    return read_pyramid(io.BytesIO(data), sample_id=sample_id)


def pyramid_to_bytes(pyramid):
    buf = io.BytesIO()
    write_pyramid(pyramid, buf)
    return buf.getvalue()


@dataclass
class ManifestEntry:
    sample_id: str
    feature_file_path: str
    label: str
    split: str
    class_name: str = ""
    anomaly: dict | None = None

    def to_json(self):
        rec = {
            "sample_id": self.sample_id,
            "feature_file_path": self.feature_file_path,
            "label": self.label,
            "split": self.split,
            "class_name": self.class_name,
        }
        if self.anomaly is not None:
            rec["anomaly"] = self.anomaly
        return rec


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    format_version: int = 1

    def validate(self):
        seen = set()
        for e in self.entries:
            if e.label not in LABELS:
                raise ManifestError(f"{e.sample_id}: unknown label {e.label!r}")
            if e.split not in SPLITS:
                raise ManifestError(f"{e.sample_id}: unknown split {e.split!r}")
            if e.split == "train" and e.label != "normal":
                raise ManifestError(
                    f"{e.sample_id}: train split must contain only normal samples (semi-supervised contract)"
                )
            if e.sample_id in seen:
                raise ManifestError(f"duplicate sample_id {e.sample_id!r}")
            seen.add(e.sample_id)
        return self

    def save(self, path):
        self.validate()
        doc = {"format_version": self.format_version, "entries": [e.to_json() for e in self.entries]}
        tmp = str(path) + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, str(path))

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"manifest {path}: invalid JSON ({exc})") from exc
        if not isinstance(doc, dict) or "entries" not in doc:
            raise ManifestError(f"manifest {path}: missing entries")
        version = int(doc.get("format_version", 0))
        if version != 1:
            raise ManifestError(f"manifest {path}: unsupported format_version {version}")
        entries = []
        for rec in doc["entries"]:
            try:
                entries.append(
                    ManifestEntry(
                        sample_id=rec["sample_id"],
                        feature_file_path=rec["feature_file_path"],
                        label=rec["label"],
                        split=rec["split"],
                        class_name=rec.get("class_name", ""),
                        anomaly=rec.get("anomaly"),
                    )
                )
            except KeyError as exc:
                raise ManifestError(f"manifest {path}: entry missing key {exc}") from exc
        manifest = cls(entries=entries, format_version=version)
        manifest.validate()
        return manifest


def load_dataset(manifest_path, standardize=False):
    """Load every sample referenced by a manifest.

    Returns a list of (FeaturePyramid, label, split) tuples in manifest order.
    All samples must share one shape signature. With ``standardize=True``,
    per-channel mean/std are estimated on the train split and applied to every
    sample (off by default; features are normally consumed as extracted).
    """
    manifest = DatasetManifest.load(manifest_path)
    base = os.path.dirname(os.path.abspath(str(manifest_path)))
    samples = []
    signature = None
    for e in manifest.entries:
        path = e.feature_file_path
        if not os.path.isabs(path):
            path = os.path.join(base, path)
        if not os.path.exists(path):
            raise ManifestError(f"{e.sample_id}: feature file not found: {path}")
        pyramid = read_pyramid(path, sample_id=e.sample_id)
        if signature is None:
            signature = pyramid.shape_signature()
        elif pyramid.shape_signature() != signature:
            raise ShapeMismatchError(
                f"{e.sample_id}: shape {pyramid.shape_signature()} differs from dataset shape {signature}"
            )
        samples.append((pyramid, e.label, e.split))
    if standardize and samples:
        _standardize_in_place(samples)
    return samples


def _standardize_in_place(samples, eps=1e-8):
    train = [p for p, _, split in samples if split == "train"]
    if not train:
        raise ManifestError("standardization requested but the manifest has no train split")
    num_scales = train[0].num_scales
    for k in range(num_scales):
        stack = np.stack([p.scales[k] for p in train])  # (N, C, H, W)
        mean = stack.mean(axis=(0, 2, 3), keepdims=False)
        std = stack.std(axis=(0, 2, 3), keepdims=False)
        std = np.maximum(std, eps)
        for p, _, _ in samples:
            p.scales[k] = ((p.scales[k] - mean[:, None, None]) / std[:, None, None]).astype(np.float32)


def split_dataset(samples):
    """Partition loaded samples into (train_pyramids, test_pyramids, test_labels)."""
    train = [p for p, label, split in samples if split == "train"]
    test = [(p, label) for p, label, split in samples if split == "test"]
    return train, [p for p, _ in test], [label for _, label in test]
