"""Portable binary model files (magic "GTEP", version 1) plus a JSON sidecar.

Layout, all little-endian, floats 32-bit:

    bytes 0..3    magic b"GTEP"
    u32           format_version = 1
    u32           n_layers L (weight layers)
    u32 * (L+1)   dims
    u32           feature-mode tag (0 full, 1 vel, 2 vel1lag)
    f32 * d0      feature means
    f32 * d0      feature stds
    f32           target mean
    f32           target std
    per layer l:  f32 weights (dims[l+1] x dims[l], row-major), f32 biases (dims[l+1])

File length is exactly computable from dims; loaders reject any mismatch.
See docs/model_format.md for a worked hex example.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .exceptions import (
    InvalidArgumentError,
    ModelFormatError,
    ModelLengthError,
    ModelVersionError,
)
from .features import FeatureMode, Normalizer

MAGIC = b"GTEP"
FORMAT_VERSION = 1
_MODE_TAGS = {FeatureMode.FULL: 0, FeatureMode.VELOCITY_ONLY: 1,
              FeatureMode.VELOCITY_PLUS_ONE_LAG: 2}
_TAG_MODES = {v: k for k, v in _MODE_TAGS.items()}
_MAX_LAYERS = 64


def expected_size(dims) -> int:
    """Exact file size in bytes for a model with the given dims."""
    dims = list(dims)
    n_layers = len(dims) - 1
    size = 4 + 4 + 4 + 4 * (n_layers + 1) + 4          # header
    size += 4 * (2 * dims[0] + 2)                      # normalizer block
    size += sum(4 * (dims[l + 1] * dims[l] + dims[l + 1]) for l in range(n_layers))
    return size


def save(model, path) -> None:
    """Write a trained model (mlp + normalizer + feature mode) to `path`."""
    mlp = model.mlp
    norm = model.normalizer
    for arr in (*mlp.weights, *mlp.biases):
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError("model has non-finite parameters")
    if norm.n_features != mlp.dims[0]:
        raise InvalidArgumentError("normalizer width does not match model input dim")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<II", FORMAT_VERSION, mlp.n_layers)
    out += struct.pack(f"<{mlp.n_layers + 1}I", *mlp.dims)
    out += struct.pack("<I", _MODE_TAGS[model.feature_mode])
    out += np.asarray(norm.feature_means, dtype="<f4").tobytes()
    out += np.asarray(norm.feature_stds, dtype="<f4").tobytes()
    out += struct.pack("<ff", norm.target_mean, norm.target_std)
    for w, b in zip(mlp.weights, mlp.biases):
        out += np.ascontiguousarray(w, dtype="<f4").tobytes()
        out += np.ascontiguousarray(b, dtype="<f4").tobytes()
    Path(path).write_bytes(bytes(out))


def load(path):
    """Load a model file; byte-exact inverse of save()."""
    from .nn import Mlp
    from .training import TrainedModel

    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise ModelLengthError(12, len(raw))
    if raw[:4] != MAGIC:
        raise ModelFormatError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    version, n_layers = struct.unpack_from("<II", raw, 4)
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"unsupported format version {version}")
    if not 1 <= n_layers <= _MAX_LAYERS:
        raise ModelFormatError(f"implausible layer count {n_layers}")
    head = 12 + 4 * (n_layers + 1) + 4
    if len(raw) < head:
        raise ModelLengthError(head, len(raw))
    dims = struct.unpack_from(f"<{n_layers + 1}I", raw, 12)
    if any(d < 1 for d in dims):
        raise ModelFormatError(f"invalid dims {dims}")
    tag = struct.unpack_from("<I", raw, 12 + 4 * (n_layers + 1))[0]
    if tag not in _TAG_MODES:
        raise ModelFormatError(f"unknown feature-mode tag {tag}")
    total = expected_size(dims)
    if len(raw) != total:
        raise ModelLengthError(total, len(raw))

    off = head
    d0 = dims[0]

    def take_f32(count):
        nonlocal off
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=off).copy()
        off += 4 * count
        return arr

    means = take_f32(d0)
    stds = take_f32(d0)
    t_mean, t_std = struct.unpack_from("<ff", raw, off)
    off += 8
    weights, biases = [], []
    for l in range(n_layers):
        weights.append(take_f32(dims[l + 1] * dims[l]).reshape(dims[l + 1], dims[l]))
        biases.append(take_f32(dims[l + 1]))
    norm = Normalizer(feature_means=means, feature_stds=stds,
                      target_mean=float(np.float32(t_mean)),
                      target_std=float(np.float32(t_std)))
    mlp = Mlp(tuple(int(d) for d in dims), weights, biases)
    return TrainedModel(mlp=mlp, normalizer=norm, feature_mode=_TAG_MODES[tag])


def export_json_meta(model, path) -> None:
    """Human-readable sidecar: architecture, frozen feature order, training summary.

    Advisory only; the binary file is self-sufficient for inference.
    """
    from .nn import param_count

    meta = {
        "schema": 1,
        "format": {"magic": MAGIC.decode(), "version": FORMAT_VERSION},
        "dims": list(model.mlp.dims),
        "param_count": param_count(model.mlp.dims),
        "feature_mode": model.feature_mode.value,
        "feature_order": list(model.feature_mode.feature_names),
        "normalizer": {
            "target_mean_mw": model.normalizer.target_mean,
            "target_std_mw": model.normalizer.target_std,
        },
    }
    if model.config is not None:
        cfg = model.config
        meta["training"] = {
            "lr": cfg.lr, "batch_size": cfg.batch_size, "max_epochs": cfg.max_epochs,
            "patience": cfg.patience, "dropout_p": cfg.dropout_p, "seed": cfg.seed,
            "lag_norm": cfg.lag_norm,
        }
    if model.best_epoch is not None:
        meta["best_epoch"] = model.best_epoch
        meta["stop_epoch"] = model.stop_epoch
        meta["best_val_loss"] = model.history[model.best_epoch][2]
    if model.metrics:
        meta["metrics"] = model.metrics
    Path(path).write_text(json.dumps(meta, indent=2) + "\n")
