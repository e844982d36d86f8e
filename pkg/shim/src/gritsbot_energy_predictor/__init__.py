"""Deployment shim for GTEP energy-predictor model files.

Pure standard library (struct + math): no numpy and no training framework, so
it runs on embedded Python installs as-is.  Loads a trained model file and
steps the autoregressive power predictor either in rollout mode (the 5-value
lag buffer is fed the predictor's own outputs) or corrected mode (the buffer
is fed sensor measurements).

    from gritsbot_energy_predictor import EnergyPredictor
    predictor = EnergyPredictor('energy_predictor.gtep')
    predictor.reset(initial_power=3500.0)
    for t in range(episode_length):
        power_mW = predictor.step(v_cmd, w_cmd)
        battery_mWh -= power_mW * dt / 3600
"""

from __future__ import annotations

import math
import struct

__all__ = ["EnergyPredictor", "load", "ModelFormatError", "ModelVersionError",
           "ModelLengthError"]
__version__ = "0.1.0"

MAGIC = b"GTEP"
FORMAT_VERSION = 1

_N_LAGS = 5
_SQRT1_2 = 1.0 / math.sqrt(2.0)
_MAX_LAYERS = 64
# feature-mode tag -> expected input width
_MODE_WIDTHS = {0: 11, 1: 6, 2: 7}


class ModelFormatError(ValueError):
    """Bad magic bytes or an otherwise corrupt model file."""


class ModelVersionError(ValueError):
    """Unsupported model format version."""


class ModelLengthError(ValueError):
    """Truncated or padded model file."""

    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"expected {expected} bytes, file has {actual}")


def _gelu(x: float) -> float:
    return 0.5 * x * (1.0 + math.erf(x * _SQRT1_2))


def _expected_size(dims) -> int:
    n_layers = len(dims) - 1
    size = 12 + 4 * (n_layers + 1) + 4 + 4 * (2 * dims[0] + 2)
    size += sum(4 * (dims[l + 1] * dims[l] + dims[l + 1]) for l in range(n_layers))
    return size


class EnergyPredictor:
    """Single-owner runtime predictor over a loaded model snapshot."""

    def __init__(self, path, dt: float = 1.0 / 30.0):
        if dt <= 0:
            raise ValueError("dt must be > 0")
        self.dt = dt
        with open(path, "rb") as f:
            raw = f.read()
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
        if tag not in _MODE_WIDTHS:
            raise ModelFormatError(f"unknown feature-mode tag {tag}")
        if _MODE_WIDTHS[tag] != dims[0]:
            raise ModelFormatError(
                f"feature-mode tag {tag} implies input width {_MODE_WIDTHS[tag]}, "
                f"file has {dims[0]}")
        total = _expected_size(dims)
        if len(raw) != total:
            raise ModelLengthError(total, len(raw))

        off = head

        def take(count):
            nonlocal off
            vals = struct.unpack_from(f"<{count}f", raw, off)
            off += 4 * count
            return list(vals)

        d0 = dims[0]
        self._dims = dims
        self._means = take(d0)
        self._stds = take(d0)
        self._target_mean, self._target_std = take(2)
        self._weights = []
        self._biases = []
        for l in range(n_layers):
            out_d, in_d = dims[l + 1], dims[l]
            flat = take(out_d * in_d)
            self._weights.append([flat[r * in_d:(r + 1) * in_d] for r in range(out_d)])
            self._biases.append(take(out_d))

        self._buf = None
        self._prev_v = 0.0
        self._prev_w = 0.0
        self._steps = 0

    @property
    def dims(self) -> tuple:
        return self._dims

    @property
    def lag_buffer(self) -> tuple:
        self._require_reset()
        return tuple(self._buf)

    @property
    def steps(self) -> int:
        return self._steps

    def reset(self, initial_power: float) -> None:
        """Fill the lag buffer with initial_power and zero the previous commands."""
        if not initial_power > 0:
            raise ValueError("initial_power must be > 0")
        self._buf = [float(initial_power)] * _N_LAGS
        self._prev_v = 0.0
        self._prev_w = 0.0
        self._steps = 0

    def _require_reset(self) -> None:
        if self._buf is None:
            raise RuntimeError("predictor used before reset()")

    def _predict(self, v: float, w: float) -> float:
        feats = [v, w, (v - self._prev_v) / self.dt, (w - self._prev_w) / self.dt,
                 abs(v), abs(w)] + self._buf
        x = [(feats[i] - self._means[i]) / self._stds[i] for i in range(self._dims[0])]
        last = len(self._weights) - 1
        for l in range(last):
            x = [_gelu(sum(wr[j] * x[j] for j in range(len(x))) + b)
                 for wr, b in zip(self._weights[l], self._biases[l])]
        wr, b = self._weights[last][0], self._biases[last][0]
        out = sum(wr[j] * x[j] for j in range(len(x))) + b
        return out * self._target_std + self._target_mean

    def _advance(self, v: float, w: float, fed_back: float) -> None:
        self._buf = [fed_back] + self._buf[:-1]
        self._prev_v = v
        self._prev_w = w
        self._steps += 1

    def step(self, v: float, w: float) -> float:
        """Rollout step: predict power (mW), feed the prediction back as lag 1."""
        self._require_reset()
        if not (math.isfinite(v) and math.isfinite(w)):
            raise ValueError("velocities must be finite")
        pred = self._predict(v, w)
        self._advance(v, w, pred)
        return pred

    def step_corrected(self, v: float, w: float, measured_power: float) -> float:
        """Corrected step: returns the pre-correction prediction, then feeds
        measured_power back as lag 1."""
        self._require_reset()
        if not (math.isfinite(v) and math.isfinite(w)):
            raise ValueError("velocities must be finite")
        if not measured_power > 0:
            raise ValueError("measured_power must be > 0")
        pred = self._predict(v, w)
        self._advance(v, w, float(measured_power))
        return pred


def load(path, dt: float = 1.0 / 30.0) -> EnergyPredictor:
    """Load a model file; alias for the EnergyPredictor constructor."""
    return EnergyPredictor(path, dt=dt)
