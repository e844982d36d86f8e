"""Runtime predictor: autoregressive rollout (self-fed lags), measurement-
corrected stepping, and coulomb-counting battery integration.

Derivative features always come from commanded velocities, the only signal
available at deploy time; on hardware logs with slipping wheels this is a
known divergence risk.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import nn
from .exceptions import InvalidArgumentError, InvalidStateError
from .features import N_LAGS, FeatureMode, Normalizer
from .telemetry import DT


class Mode(Enum):
    ROLLOUT = "rollout"
    CORRECTED = "corrected"


class Predictor:
    """Single-owner runtime state: 5-value lag buffer (most recent first),
    previous commands, and an immutable model snapshot shared across instances."""

    def __init__(self, model=None, *, mlp: nn.Mlp | None = None,
                 normalizer: Normalizer | None = None,
                 feature_mode: FeatureMode = FeatureMode.FULL,
                 dt: float = DT, mode: Mode = Mode.ROLLOUT):
        if model is not None:
            mlp = model.mlp
            normalizer = model.normalizer
            feature_mode = model.feature_mode
        if mlp is None or normalizer is None:
            raise InvalidArgumentError("need a trained model or explicit mlp+normalizer")
        if dt <= 0:
            raise InvalidArgumentError("dt must be > 0")
        if normalizer.n_features != mlp.dims[0] or feature_mode.n_features != mlp.dims[0]:
            raise InvalidArgumentError("model / normalizer / feature-mode widths disagree")
        self._mlp = mlp
        self._norm = normalizer
        self._mode_sel = feature_mode
        self.dt = dt
        self.mode = mode
        self._buf: np.ndarray | None = None
        self._prev_v = 0.0
        self._prev_w = 0.0
        self._steps = 0

    @property
    def lag_buffer(self) -> tuple:
        """Debug view of the lag buffer, most recent value first."""
        self._require_reset()
        return tuple(float(x) for x in self._buf)

    @property
    def steps(self) -> int:
        return self._steps

    def reset(self, initial_power: float) -> None:
        """Fill the lag buffer with initial_power and zero the previous commands."""
        if not initial_power > 0:
            raise InvalidArgumentError("initial_power must be > 0")
        self._buf = np.full(N_LAGS, float(initial_power))
        self._prev_v = 0.0
        self._prev_w = 0.0
        self._steps = 0

    def _require_reset(self):
        if self._buf is None:
            raise InvalidStateError("predictor used before reset()")

    def _predict(self, v: float, w: float) -> float:
        raw = np.empty(6 + N_LAGS)
        raw[0] = v
        raw[1] = w
        raw[2] = (v - self._prev_v) / self.dt
        raw[3] = (w - self._prev_w) / self.dt
        raw[4] = abs(v)
        raw[5] = abs(w)
        raw[6:] = self._buf
        x = self._mode_sel.select(raw)
        x = ((x - self._norm.feature_means) / self._norm.feature_stds).astype(np.float32)
        out = nn.forward(self._mlp, x)
        return float(self._norm.denormalize_target(np.float32(out)))

    def _advance(self, v: float, w: float, fed_back: float) -> None:
        self._buf[1:] = self._buf[:-1]
        self._buf[0] = fed_back
        self._prev_v = v
        self._prev_w = w
        self._steps += 1

    def step(self, v: float, w: float) -> float:
        """Rollout step: predict, then feed the prediction back as lag 1."""
        self._require_reset()
        if not (np.isfinite(v) and np.isfinite(w)):
            raise InvalidArgumentError("velocities must be finite")
        pred = self._predict(v, w)
        self._advance(v, w, pred)
        return pred

    def step_corrected(self, v: float, w: float, measured_power: float) -> float:
        """Corrected step: returns the prediction made BEFORE ingesting the
        measurement, then feeds measured_power back as lag 1."""
        self._require_reset()
        if not (np.isfinite(v) and np.isfinite(w)):
            raise InvalidArgumentError("velocities must be finite")
        if not measured_power > 0:
            raise InvalidArgumentError("measured_power must be > 0")
        pred = self._predict(v, w)
        self._advance(v, w, float(measured_power))
        return pred


@dataclass(frozen=True)
class BatteryState:
    remaining_mwh: float


def battery_update(battery: BatteryState, power_mw: float, dt: float) -> BatteryState:
    """Discharge by power_mw over dt seconds: remaining -= power * dt / 3600."""
    if power_mw < 0:
        raise InvalidArgumentError("power must be >= 0")
    if dt <= 0:
        raise InvalidArgumentError("dt must be > 0")
    return BatteryState(battery.remaining_mwh - power_mw * dt / 3600.0)
