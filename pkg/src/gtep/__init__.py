"""Autoregressive power-consumption modeling toolkit for differential-drive
robots: synthetic telemetry, an 11-feature pipeline, a from-scratch micro-MLP
trainer, evaluation statistics, a low-latency runtime predictor, and a
portable binary model format.
"""

from .evaluation import (
    EvalReport,
    TransferReport,
    ar1_ceiling,
    autocorrelation,
    cumulative_energy_error,
    evaluate,
    latency_bench,
    mae,
    mape,
    make_transfer_variants,
    oracle_ceiling,
    predictions_corrected,
    predictions_rollout,
    predictions_teacher,
    r_squared,
    residual_stats,
    transfer_study,
)
from .exceptions import (
    CsvParseError,
    CsvSchemaError,
    GtepError,
    InvalidArgumentError,
    InvalidStateError,
    ModelFormatError,
    ModelLengthError,
    ModelVersionError,
    TrainingDivergedError,
    UndefinedMetricError,
)
from .features import (
    FEATURE_NAMES,
    FeatureMode,
    Normalizer,
    SupervisedSet,
    build_features,
    compute_derivatives,
    fit_normalizer,
)
from .model_io import export_json_meta, load, save
from .nn import DEFAULT_DIMS, AdamState, Mlp, adam_init, adam_step, backward, forward, forward_train, gelu, init, param_count
from .predictor import BatteryState, Mode, Predictor, battery_update
from .rng import Rng, derive_seed
from .telemetry import (
    DT,
    FS,
    Dataset,
    DatasetStats,
    OracleParams,
    Protocol,
    Sample,
    Trial,
    calibrate_noise_std,
    dataset_stats,
    generate_protocol,
    load_csv,
    load_dataset,
    make_dataset,
    make_trial,
    simulate_power,
    steady_state_power,
    write_csv,
    write_dataset,
)
from .training import Split, TrainConfig, TrainedModel, ablate, split_dataset, train, write_history_csv

__version__ = "0.1.0"
