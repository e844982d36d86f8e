"""Training loop: fixed trial split, mini-batch MSE with Adam, early stopping
with best-weight restoration, and the feature-mode ablation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .exceptions import InvalidArgumentError, TrainingDivergedError
from .features import FeatureMode, Normalizer, SupervisedSet, build_features, fit_normalizer
from .rng import Rng
from .telemetry import Dataset

HIDDEN_DIMS = (64, 64, 32)
# val loss must beat the best by this margin to count as improvement,
# so float noise cannot reset the patience window
MIN_IMPROVEMENT = 1e-7


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 256
    max_epochs: int = 100
    patience: int = 10
    dropout_p: float = 0.1
    seed: int = 42
    feature_mode: FeatureMode = FeatureMode.FULL
    lag_norm: str = "percol"

    def __post_init__(self):
        if self.batch_size < 1:
            raise InvalidArgumentError("batch_size must be >= 1")
        if self.patience < 1:
            raise InvalidArgumentError("patience must be >= 1")
        if not 0.0 <= self.dropout_p < 1.0:
            raise InvalidArgumentError("dropout_p must be in [0, 1)")


@dataclass(frozen=True)
class Split:
    """Trial-id split; defaults to the fixed 1-4 / 5 / 6 mapping."""

    train_ids: tuple = (1, 2, 3, 4)
    val_ids: tuple = (5,)
    test_ids: tuple = (6,)


def split_dataset(dataset: Dataset, split: Split | None = None) -> Split:
    """Validate a split against the dataset: ids present, disjoint, non-empty."""
    split = split or Split()
    groups = (tuple(split.train_ids), tuple(split.val_ids), tuple(split.test_ids))
    if any(len(g) == 0 for g in groups):
        raise InvalidArgumentError("every split member needs at least one trial")
    flat = [tid for g in groups for tid in g]
    if len(set(flat)) != len(flat):
        raise InvalidArgumentError("split groups must be disjoint")
    have = {t.id for t in dataset.trials}
    missing = sorted(set(flat) - have)
    if missing:
        raise InvalidArgumentError(f"dataset is missing trial ids {missing}")
    return Split(*groups)


@dataclass
class TrainedModel:
    """Weights + normalizer + the feature mode they were fitted for.

    history rows are (epoch, train_loss, val_loss) on normalized targets;
    best_epoch indexes the restored weights.  Models loaded from disk carry
    only the inference fields.
    """

    mlp: nn.Mlp
    normalizer: Normalizer
    feature_mode: FeatureMode = FeatureMode.FULL
    history: list = field(default_factory=list)
    best_epoch: int | None = None
    stop_epoch: int | None = None
    config: TrainConfig | None = None
    metrics: dict | None = None


def _rows_for(dataset: Dataset, ids) -> SupervisedSet:
    return SupervisedSet.concat([build_features(dataset.trial(tid)) for tid in ids])


def train(dataset: Dataset, config: TrainConfig, split: Split | None = None) -> TrainedModel:
    """Run the full training recipe and return the best-validation model.

    MSE on z-normalized targets, seeded per-epoch shuffles, dropout only on
    training batches, early stop after `patience` epochs without improvement,
    best weights restored.  Test trials are never touched here.
    """
    if config.max_epochs < 1:
        raise InvalidArgumentError("max_epochs must be >= 1")
    split = split_dataset(dataset, split)
    mode = config.feature_mode

    train_rows = _rows_for(dataset, split.train_ids)
    val_rows = _rows_for(dataset, split.val_ids)
    norm = fit_normalizer(train_rows, mode=mode, lag_norm=config.lag_norm)

    x_tr = norm.normalize(mode.select(train_rows.features)).astype(np.float32)
    y_tr = norm.normalize_target(train_rows.targets).astype(np.float32)
    x_val = norm.normalize(mode.select(val_rows.features)).astype(np.float32)
    y_val64 = norm.normalize_target(val_rows.targets)

    mlp = nn.init((mode.n_features, *HIDDEN_DIMS, 1), seed=config.seed)
    adam = nn.adam_init(mlp)
    rng_shuffle = Rng(config.seed, stream=21)
    rng_drop = Rng(config.seed, stream=22)

    n = len(y_tr)
    history = []
    best_val = np.inf
    best_epoch = 0
    best_params = mlp.copy()
    stall = 0
    epoch = 0
    for epoch in range(config.max_epochs):
        perm = rng_shuffle.permutation(n)
        sq_sum = 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = perm[start:start + config.batch_size]
            pred, cache = nn.forward_train(mlp, x_tr[idx], config.dropout_p, rng_drop)
            err = pred - y_tr[idx]
            batch_sq = float(np.sum(err.astype(np.float64) ** 2))
            if not np.isfinite(batch_sq):
                raise TrainingDivergedError(epoch, b)
            sq_sum += batch_sq
            grads = nn.backward(mlp, cache, (2.0 / len(idx)) * err)
            nn.adam_step(mlp, grads, adam, config.lr)
        train_loss = sq_sum / n
        val_err = np.asarray(nn.forward(mlp, x_val), dtype=np.float64) - y_val64
        val_loss = float(np.mean(val_err ** 2))
        if not np.isfinite(val_loss):
            raise TrainingDivergedError(epoch, -1)
        history.append((epoch, train_loss, val_loss))
        if val_loss < best_val - MIN_IMPROVEMENT:
            best_val = val_loss
            best_epoch = epoch
            best_params = mlp.copy()
            stall = 0
        else:
            stall += 1
            if stall >= config.patience:
                break

    return TrainedModel(mlp=best_params, normalizer=norm, feature_mode=mode,
                        history=history, best_epoch=best_epoch, stop_epoch=epoch,
                        config=config)


def write_history_csv(model: TrainedModel, path) -> None:
    with open(path, "w", newline="\n") as f:
        f.write("epoch,train_loss,val_loss\n")
        for epoch, tr, val in model.history:
            f.write(f"{epoch},{tr!r},{val!r}\n")


def ablate(dataset: Dataset, seed: int, base_config: TrainConfig | None = None,
           split: Split | None = None) -> dict:
    """Train one model per feature mode with a shared seed; returns
    {FeatureMode: held-out teacher-forced R^2}."""
    from .evaluation import evaluate

    base = base_config or TrainConfig()
    split = split_dataset(dataset, split)
    table = {}
    for mode in FeatureMode:
        cfg = replace(base, seed=seed, feature_mode=mode)
        model = train(dataset, cfg, split)
        report = evaluate(model, dataset.trial(split.test_ids[0]), mode="teacher")
        table[mode] = report.r2
    return table
