"""Versioned binary model checkpoints.

Layout: magic ``CSFC``, u32 format version, u32 header length, then a UTF-8
JSON header followed by raw little-endian tensor payloads. The header carries
the flow configuration (including the build seed) and a manifest naming every
tensor with dtype and shape, in a fixed order, so write->read round-trips to
a model with bitwise-identical state.
"""

from __future__ import annotations

import io
import json
import os
import struct

import numpy as np
import torch

from ..errors import ManifestError, PyramidFormatError, TruncatedStreamError, UnsupportedVersionError
from .config import FlowConfig
from .modules import CrossScaleFlow

CHECKPOINT_MAGIC = b"CSFC"
CHECKPOINT_VERSION = 1

_DTYPES = {"<f8": torch.float64, "<i8": torch.int64}
_DTYPE_NAMES = {torch.float64: "<f8", torch.int64: "<i8"}


def _state_arrays(model):
    """State tensors as little-endian numpy arrays, in state-dict order."""
    arrays = []
    for name, tensor in model.state_dict().items():
        if tensor.dtype not in _DTYPE_NAMES:
            raise ManifestError(f"unsupported tensor dtype for {name}: {tensor.dtype}")
        arrays.append((name, _DTYPE_NAMES[tensor.dtype], tensor.detach().cpu().numpy()))
    return arrays


def save_checkpoint(model: CrossScaleFlow, destination):
    """Write the model to a path or binary stream (paths are written atomically)."""
    arrays = _state_arrays(model)
    header = {
        "format_version": CHECKPOINT_VERSION,
        "config": model.config.to_json(),
        "tensors": [
            {"name": name, "dtype": dtype, "shape": list(arr.shape)} for name, dtype, arr in arrays
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    buffer = io.BytesIO()
    buffer.write(CHECKPOINT_MAGIC)
    buffer.write(struct.pack("<II", CHECKPOINT_VERSION, len(header_bytes)))
    buffer.write(header_bytes)
    for _, dtype, arr in arrays:
        buffer.write(np.ascontiguousarray(arr).astype(dtype, copy=False).tobytes())
    payload = buffer.getvalue()

    if hasattr(destination, "write"):
        destination.write(payload)
        return
    path = os.fspath(destination)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def _read_exact(stream, count, what):
    data = stream.read(count)
    if len(data) != count:
        raise TruncatedStreamError(f"checkpoint ended early while reading {what}")
    return data


def load_checkpoint(source) -> CrossScaleFlow:
    """Rebuild a model from a path or binary stream."""
    if hasattr(source, "read"):
        return _load_from(source)
    with open(os.fspath(source), "rb") as fh:
        return _load_from(fh)


def _load_from(stream):
    magic = _read_exact(stream, 4, "magic")
    if magic != CHECKPOINT_MAGIC:
        raise PyramidFormatError(f"bad checkpoint magic {magic!r}")
    version, header_len = struct.unpack("<II", _read_exact(stream, 8, "header sizes"))
    if version != CHECKPOINT_VERSION:
        raise UnsupportedVersionError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(_read_exact(stream, header_len, "header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise PyramidFormatError(f"unreadable checkpoint header: {exc}") from exc

    config = FlowConfig.from_json(header["config"])
    model = CrossScaleFlow(config)
    expected = model.state_dict()
    manifest = header["tensors"]
    if [entry["name"] for entry in manifest] != list(expected.keys()):
        raise ManifestError("checkpoint tensor names do not match the configured model")

    state = {}
    for entry in manifest:
        dtype = entry["dtype"]
        if dtype not in _DTYPES:
            raise ManifestError(f"unsupported tensor dtype in checkpoint: {dtype}")
        shape = tuple(int(s) for s in entry["shape"])
        if tuple(expected[entry["name"]].shape) != shape:
            raise ManifestError(f"tensor {entry['name']} has shape {shape}, expected "
                                f"{tuple(expected[entry['name']].shape)}")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = _read_exact(stream, count * 8, entry["name"])
        arr = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
        state[entry["name"]] = torch.from_numpy(arr)
    model.load_state_dict(state, strict=True)
    return model
