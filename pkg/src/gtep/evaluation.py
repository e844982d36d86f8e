"""Metrics and statistical analyses: R^2, MAE, MAPE, residual distribution,
autocorrelation, prediction ceilings, cumulative energy error, the perturbed-
robot transfer study, and the single-step latency benchmark.

All accumulations run in float64 regardless of model precision.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass

import numpy as np

from . import nn
from .exceptions import InvalidArgumentError, UndefinedMetricError
from .features import build_features
from .predictor import Predictor
from .rng import derive_seed
from .telemetry import (
    DT,
    Dataset,
    OracleParams,
    Protocol,
    Trial,
    generate_protocol,
    simulate_power,
)

N_WARM = 5  # rows before the first supervised target (lag depth)


def _paired(pred, actual, min_len=1):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    actual = np.asarray(actual, dtype=np.float64).ravel()
    if pred.shape != actual.shape:
        raise InvalidArgumentError("pred and actual lengths differ")
    if len(pred) < min_len:
        raise InvalidArgumentError(f"need at least {min_len} points")
    return pred, actual


def r_squared(pred, actual) -> float:
    """Coefficient of determination 1 - SS_res/SS_tot against the actual series' own mean."""
    pred, actual = _paired(pred, actual, min_len=2)
    ss_tot = float(np.sum((actual - actual.mean()) ** 2))
    if ss_tot == 0.0:
        raise UndefinedMetricError("R^2 is undefined for a constant actual series")
    ss_res = float(np.sum((pred - actual) ** 2))
    return 1.0 - ss_res / ss_tot


def mae(pred, actual) -> float:
    pred, actual = _paired(pred, actual)
    return float(np.mean(np.abs(pred - actual)))


def mape(pred, actual) -> float:
    """Mean absolute percentage error; requires every actual value nonzero."""
    pred, actual = _paired(pred, actual)
    if np.any(actual == 0.0):
        raise UndefinedMetricError("MAPE is undefined when actual contains zeros")
    return float(np.mean(np.abs((pred - actual) / actual))) * 100.0


def autocorrelation(series, max_lag: int) -> np.ndarray:
    """ACF rho_0..rho_max_lag: rho_k = sum (x_t-mu)(x_{t+k}-mu) / sum (x_t-mu)^2."""
    series = np.asarray(series, dtype=np.float64).ravel()
    if max_lag < 1:
        raise InvalidArgumentError("max_lag must be >= 1")
    if len(series) <= max_lag:
        raise InvalidArgumentError("series must be longer than max_lag")
    centered = series - series.mean()
    denom = float(np.sum(centered ** 2))
    if denom == 0.0:
        raise UndefinedMetricError("ACF is undefined for a constant series")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for k in range(1, max_lag + 1):
        out[k] = float(np.sum(centered[:-k] * centered[k:])) / denom
    return out


def ar1_ceiling(rho1: float) -> float:
    """R^2 ceiling of an AR(1) process with lag-1 correlation rho1: rho1^2."""
    if abs(rho1) > 1.0:
        raise InvalidArgumentError("|rho1| must be <= 1")
    return rho1 * rho1


def oracle_ceiling(data, params: OracleParams) -> float:
    """Supremum one-step-ahead R^2 on oracle data: 1 - noise_std^2 / var(P).

    Exact for the simulated oracle because the only irreducible part of P_t
    given P_{t-1} and the commands is the innovation noise.
    """
    if isinstance(data, Dataset):
        power = np.concatenate([t.power for t in data.trials])
    elif isinstance(data, Trial):
        power = data.power
    else:
        power = np.asarray(data, dtype=np.float64)
    var_p = float(np.var(power))
    if var_p == 0.0:
        raise UndefinedMetricError("power variance is zero")
    return 1.0 - params.noise_std ** 2 / var_p


def residual_stats(pred, actual):
    """(mean, p5, p95) of residuals pred - actual; percentiles by linear interpolation."""
    pred, actual = _paired(pred, actual, min_len=20)
    res = pred - actual
    p5, p95 = np.percentile(res, [5.0, 95.0], method="linear")
    return float(res.mean()), float(p5), float(p95)


def cumulative_energy_error(pred_power, actual_power, dt: float) -> float:
    """|E_pred - E_actual| / E_actual * 100 with energy = sum(power)*dt/3600 mWh."""
    pred, actual = _paired(pred_power, actual_power)
    if dt <= 0:
        raise InvalidArgumentError("dt must be > 0")
    e_pred = float(np.sum(pred)) * dt / 3600.0
    e_actual = float(np.sum(actual)) * dt / 3600.0
    if e_actual == 0.0:
        raise UndefinedMetricError("actual energy is zero")
    return abs(e_pred - e_actual) / e_actual * 100.0


@dataclass(frozen=True)
class EvalReport:
    r2: float
    mae_mw: float
    mape_pct: float
    residual_mean_mw: float
    residual_p5_mw: float
    residual_p95_mw: float
    cumulative_energy_error_pct: float
    n: int

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# Prediction paths
# ---------------------------------------------------------------------------

def predictions_teacher(model, trial: Trial):
    """Batch teacher-forced one-step predictions (measured lags) for samples 5..n-1."""
    rows = build_features(trial)
    x = model.normalizer.normalize(model.feature_mode.select(rows.features)).astype(np.float32)
    pred_norm = nn.forward(model.mlp, x)
    pred = model.normalizer.denormalize_target(pred_norm).astype(np.float64)
    return pred, rows.targets.copy()


def _walk(model, trial: Trial, corrected_after_warmup: bool):
    """Drive a Predictor over a trial; the first N_WARM steps always ingest
    measurements so the lag buffer matches the teacher-forced lags."""
    p = Predictor(model)
    p.reset(float(trial.power[0]))
    n = len(trial)
    preds = np.empty(n)
    for t in range(n):
        if t < N_WARM or corrected_after_warmup:
            preds[t] = p.step_corrected(float(trial.v[t]), float(trial.w[t]),
                                        float(trial.power[t]))
        else:
            preds[t] = p.step(float(trial.v[t]), float(trial.w[t]))
    return preds[N_WARM:], trial.power[N_WARM:].copy()


def predictions_rollout(model, trial: Trial):
    """Self-fed rollout primed with the trial's first five measured powers."""
    return _walk(model, trial, corrected_after_warmup=False)


def predictions_corrected(model, trial: Trial):
    """Measurement-corrected walk over a trial (predict, then ingest truth)."""
    return _walk(model, trial, corrected_after_warmup=True)


_PREDICTION_MODES = {
    "teacher": predictions_teacher,
    "rollout": predictions_rollout,
    "corrected": predictions_corrected,
}


def evaluate(model, trial: Trial, mode: str = "teacher") -> EvalReport:
    """Full metric set for one trial under the named prediction mode."""
    if mode not in _PREDICTION_MODES:
        raise InvalidArgumentError(f"unknown mode {mode!r}")
    pred, actual = _PREDICTION_MODES[mode](model, trial)
    res_mean, p5, p95 = residual_stats(pred, actual)
    return EvalReport(
        r2=r_squared(pred, actual),
        mae_mw=mae(pred, actual),
        mape_pct=mape(pred, actual),
        residual_mean_mw=res_mean,
        residual_p5_mw=p5,
        residual_p95_mw=p95,
        cumulative_energy_error_pct=cumulative_energy_error(pred, actual, DT),
        n=len(pred),
    )


# ---------------------------------------------------------------------------
# Transfer study
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RobotResult:
    robot: int
    base_power: float
    noise_std: float
    ceiling: float
    report: EvalReport


@dataclass(frozen=True)
class TransferReport:
    robots: tuple
    mean_r2: float
    std_r2: float
    mean_mae_mw: float

    def as_dict(self) -> dict:
        return {
            "robots": [
                {"robot": r.robot, "base_power": r.base_power, "noise_std": r.noise_std,
                 "ceiling": r.ceiling, **r.report.as_dict()}
                for r in self.robots
            ],
            "mean_r2": self.mean_r2,
            "std_r2": self.std_r2,
            "mean_mae_mw": self.mean_mae_mw,
        }


def make_transfer_variants(params: OracleParams, n_robots: int = 7,
                           base_scale_max: float = 1.15,
                           noise_scale: float = 1.2) -> list:
    """Perturbed robots: base power scaled evenly across 1.0..base_scale_max,
    noise scaled by noise_scale, temporal dynamics (rho) unchanged."""
    if n_robots < 1:
        raise InvalidArgumentError("need at least one robot")
    scales = np.linspace(1.0, base_scale_max, n_robots)
    return [dataclasses.replace(params,
                                base_power=params.base_power * float(s),
                                noise_std=params.noise_std * noise_scale)
            for s in scales]


def transfer_study(model, variants, protocol: Protocol = Protocol.RANDOM_WALK,
                   n: int = 8000, seed: int = 0) -> TransferReport:
    """Evaluate a frozen model in corrected mode on fresh telemetry from each
    perturbed robot; reports per-robot metrics plus mean/std of R^2."""
    if not variants:
        raise InvalidArgumentError("variants must be non-empty")
    results = []
    for i, variant in enumerate(variants):
        cmds = generate_protocol(protocol, n, derive_seed(seed, 500 + i))
        robot_params = dataclasses.replace(variant, seed=derive_seed(seed, 600 + i))
        power = simulate_power(cmds, robot_params)
        trial = Trial(id=100 + i, protocol=protocol, t=np.arange(n) / 30.0,
                      v=cmds[:, 0], w=cmds[:, 1], power=power)
        report = evaluate(model, trial, mode="corrected")
        results.append(RobotResult(
            robot=i + 1,
            base_power=robot_params.base_power,
            noise_std=robot_params.noise_std,
            ceiling=oracle_ceiling(trial, robot_params),
            report=report,
        ))
    r2s = np.array([r.report.r2 for r in results])
    maes = np.array([r.report.mae_mw for r in results])
    return TransferReport(robots=tuple(results), mean_r2=float(r2s.mean()),
                         std_r2=float(r2s.std()), mean_mae_mw=float(maes.mean()))


# ---------------------------------------------------------------------------
# Latency benchmark
# ---------------------------------------------------------------------------

def bench_callable(fn, n_steps: int, warmup: int = 1000):
    """Time fn() per call on the current thread: (mean_us, p99_us)."""
    if n_steps < 1000:
        raise InvalidArgumentError("n_steps must be >= 1000")
    for _ in range(warmup):
        fn()
    samples = np.empty(n_steps)
    clock = time.perf_counter_ns
    for i in range(n_steps):
        t0 = clock()
        fn()
        samples[i] = clock() - t0
    return float(samples.mean()) / 1e3, float(np.percentile(samples, 99.0)) / 1e3


def latency_bench(model, n_steps: int = 10000, warmup: int = 1000):
    """Steady-state wall-clock latency of Predictor.step on one thread.

    Commands cycle through a fixed in-bounds table so branch behavior matches
    deployment; returns (mean_us, p99_us).
    """
    p = Predictor(model)
    p.reset(3500.0)
    table = [(0.1, 0.5), (0.0, 0.0), (-0.12, 1.5), (0.15, -2.0), (0.05, 3.0)]
    k = len(table)
    counter = {"i": 0}

    def step():
        v, w = table[counter["i"] % k]
        counter["i"] += 1
        p.step(v, w)

    return bench_callable(step, n_steps, warmup)
