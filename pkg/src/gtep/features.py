"""Feature pipeline: the fixed 11-column feature layout (six kinematic
features plus five power lags) and z-normalization fitted on training rows.

The column order is a frozen contract; model files record the input width and
the JSON sidecar lists these names.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import InvalidArgumentError
from .telemetry import FS, Trial

FEATURE_NAMES = ("v", "w", "dv", "dw", "abs_v", "abs_w",
                 "p_lag1", "p_lag2", "p_lag3", "p_lag4", "p_lag5")
N_LAGS = 5
STD_FLOOR = 1e-8


class FeatureMode(Enum):
    """Input subsets for the ablation study; values are CLI spellings."""

    FULL = "full"
    VELOCITY_ONLY = "vel"
    VELOCITY_PLUS_ONE_LAG = "vel1lag"

    @property
    def n_features(self) -> int:
        return {FeatureMode.FULL: 11,
                FeatureMode.VELOCITY_ONLY: 6,
                FeatureMode.VELOCITY_PLUS_ONE_LAG: 7}[self]

    def select(self, features: np.ndarray) -> np.ndarray:
        """Slice the leading columns of a full 11-column feature matrix."""
        return features[..., : self.n_features]

    @property
    def feature_names(self) -> tuple:
        return FEATURE_NAMES[: self.n_features]


def compute_derivatives(series, dt: float) -> np.ndarray:
    """Backward finite differences: out[0] = 0, out[t] = (x[t] - x[t-1]) / dt.

    Causal by construction so the runtime predictor can reproduce it online.
    """
    if dt <= 0:
        raise InvalidArgumentError("dt must be > 0")
    series = np.asarray(series, dtype=np.float64)
    if series.size == 0:
        raise InvalidArgumentError("series is empty")
    out = np.zeros_like(series)
    out[1:] = (series[1:] - series[:-1]) / dt
    return out


@dataclass
class SupervisedSet:
    """Rows of (11 raw features, target power mW) with trial/time provenance."""

    features: np.ndarray   # (n, 11) float64, raw units
    targets: np.ndarray    # (n,) float64 mW
    trial_ids: np.ndarray  # (n,) int
    time_idx: np.ndarray   # (n,) int: sample index of the target within its trial

    def __len__(self) -> int:
        return len(self.targets)

    @staticmethod
    def concat(sets) -> "SupervisedSet":
        sets = list(sets)
        return SupervisedSet(
            features=np.concatenate([s.features for s in sets]),
            targets=np.concatenate([s.targets for s in sets]),
            trial_ids=np.concatenate([s.trial_ids for s in sets]),
            time_idx=np.concatenate([s.time_idx for s in sets]),
        )


def build_features(trial: Trial) -> SupervisedSet:
    """Build supervised rows for one trial; the first row targets sample 5.

    Row for target index t carries commands at t, backward-difference
    derivatives at t, and raw power lags P_{t-1}..P_{t-5} (most recent first).
    """
    n = len(trial)
    if n < N_LAGS + 1:
        raise InvalidArgumentError(f"trial needs at least {N_LAGS + 1} samples, has {n}")
    dv = compute_derivatives(trial.v, 1.0 / FS)
    dw = compute_derivatives(trial.w, 1.0 / FS)
    t = np.arange(N_LAGS, n)
    cols = [trial.v[t], trial.w[t], dv[t], dw[t], np.abs(trial.v[t]), np.abs(trial.w[t])]
    cols += [trial.power[t - k] for k in range(1, N_LAGS + 1)]
    return SupervisedSet(
        features=np.column_stack(cols),
        targets=trial.power[t].copy(),
        trial_ids=np.full(len(t), trial.id, dtype=np.int64),
        time_idx=t.astype(np.int64),
    )


@dataclass(frozen=True)
class Normalizer:
    """Per-column z-score statistics, fitted on training rows only.

    Stored as float32 to match model precision; columns whose population std
    falls below STD_FLOOR get std 1.0 so degenerate columns normalize to zero.
    """

    feature_means: np.ndarray  # (d,) float32
    feature_stds: np.ndarray   # (d,) float32
    target_mean: float
    target_std: float

    @property
    def n_features(self) -> int:
        return len(self.feature_means)

    def normalize(self, features: np.ndarray) -> np.ndarray:
        return (features - self.feature_means) / self.feature_stds

    def normalize_target(self, power):
        return (power - self.target_mean) / self.target_std

    def denormalize_target(self, value):
        return value * self.target_std + self.target_mean


def _floored_std(x: np.ndarray, axis=None):
    std = x.std(axis=axis)
    return np.where(std < STD_FLOOR, 1.0, std)


def fit_normalizer(rows: SupervisedSet, mode: "FeatureMode" = FeatureMode.FULL,
                   lag_norm: str = "percol") -> Normalizer:
    """Fit per-column means and population stds on the given (training) rows.

    lag_norm="percol" (default) gives lag columns their own statistics;
    "target" reuses the target's mean/std for every lag column.
    """
    if len(rows) < 2:
        raise InvalidArgumentError("need at least 2 rows to fit a normalizer")
    if lag_norm not in ("percol", "target"):
        raise InvalidArgumentError(f"unknown lag_norm {lag_norm!r}")
    x = mode.select(rows.features)
    means = x.mean(axis=0)
    stds = _floored_std(x, axis=0)
    t_mean = float(rows.targets.mean())
    t_std = float(_floored_std(rows.targets))
    if lag_norm == "target" and mode is not FeatureMode.VELOCITY_ONLY:
        means = means.copy()
        stds = stds.copy()
        means[6:] = t_mean
        stds[6:] = t_std
    return Normalizer(
        feature_means=means.astype(np.float32),
        feature_stds=stds.astype(np.float32),
        target_mean=float(np.float32(t_mean)),
        target_std=float(np.float32(t_std)),
    )
