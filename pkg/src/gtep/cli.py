"""Command-line entry point.

Subcommands: gen, train, eval, analyze, ablate, transfer, bench, predict.
Option resolution precedence: explicit flags > config file (--config, flat
``key = value`` lines) > environment (GTEP_<KEY>) > built-in defaults.  Every
run prints one ``effective-config:`` line from which it can be reproduced.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import evaluation, model_io, telemetry, training
from .exceptions import GtepError
from .features import FeatureMode
from .predictor import Predictor
from .telemetry import DT, OracleParams, Protocol, TRIAL_PROTOCOLS

ENV_PREFIX = "GTEP_"


class UsageError(Exception):
    """Bad arguments or missing inputs; maps to exit code 2."""


# dest -> (default, parse) per subcommand; parse May raise ValueError
_DEFAULTS = {
    "gen": {
        "out": (None, str), "seed": (0, int), "samples_per_trial": (8000, int),
        "rho": (0.95, float), "noise_std": (telemetry.DEFAULT_NOISE_STD, float),
        "base_power": (3652.0, float), "k_v": (2000.0, float), "k_w": (150.0, float),
        "k_a": (500.0, float), "hold_power": (1, int),
    },
    "train": {
        "data": (None, str), "out": (None, str), "seed": (42, int),
        "feature_mode": ("full", str), "lag_norm": ("percol", str),
        "lr": (1e-3, float), "batch_size": (256, int), "epochs": (100, int),
        "patience": (10, int), "dropout": (0.1, float),
        "col_t": (None, str), "col_v": (None, str), "col_w": (None, str),
        "col_power": (None, str),
    },
    "eval": {
        "model": (None, str), "data": (None, str), "trial": (6, int),
        "mode": ("teacher", str), "format": ("text", str), "dump_dir": (None, str),
        "col_t": (None, str), "col_v": (None, str), "col_w": (None, str),
        "col_power": (None, str),
    },
    "analyze": {
        "data": (None, str), "max_lag": (50, int), "format": ("text", str),
        "out_csv": (None, str),
        "col_t": (None, str), "col_v": (None, str), "col_w": (None, str),
        "col_power": (None, str),
    },
    "ablate": {
        "data": (None, str), "seed": (42, int), "format": ("text", str),
    },
    "transfer": {
        "model": (None, str), "data": (None, str), "robots": (7, int),
        "base_scale_max": (1.15, float), "noise_scale": (1.2, float),
        "seed": (0, int), "format": ("text", str),
    },
    "bench": {
        "model": (None, str), "steps": (10000, int), "warmup": (1000, int),
        "format": ("text", str),
    },
    "predict": {
        "model": (None, str), "commands": (None, str), "out": (None, str),
        "mode": ("rollout", str), "initial_power": (3500.0, float), "dt": (DT, float),
    },
}

_REQUIRED = {
    "gen": ("out",), "train": ("data", "out"), "eval": ("model", "data"),
    "analyze": ("data",), "ablate": ("data",), "transfer": ("model", "data"),
    "bench": ("model",), "predict": ("model", "commands", "out"),
}


def _read_config_file(path: str) -> dict:
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read config file {path}: {e}")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, val = line.split("=", 1)
        values[key.strip().replace("-", "_")] = val.strip()
    return values


def _resolve(cmd: str, args: argparse.Namespace) -> dict:
    """Apply flag > config > env > default precedence for every option."""
    file_values = _read_config_file(args.config) if args.config else {}
    resolved = {}
    for dest, (default, parse) in _DEFAULTS[cmd].items():
        value = getattr(args, dest, None)
        if value is None:
            raw = file_values.get(dest)
            if raw is None:
                raw = os.environ.get(ENV_PREFIX + dest.upper())
            if raw is not None:
                try:
                    value = parse(raw)
                except ValueError:
                    raise UsageError(f"bad value {raw!r} for option {dest}")
            else:
                value = default
        resolved[dest] = value
    for dest in _REQUIRED[cmd]:
        if resolved[dest] is None:
            raise UsageError(f"missing required option --{dest.replace('_', '-')}")
    return resolved


def _print_effective(cmd: str, cfg: dict) -> None:
    parts = " ".join(f"{k}={cfg[k]}" for k in sorted(cfg))
    print(f"effective-config: cmd={cmd} {parts}")


def _column_mapping(cfg: dict) -> dict | None:
    """--col-* flags map canonical CSV columns to a foreign dataset's headers."""
    mapping = {key: cfg[f"col_{key}"] for key in ("t", "v", "w", "power")
               if cfg.get(f"col_{key}")}
    return mapping or None


def _load_dataset_checked(data_dir: str, columns: dict | None = None) -> telemetry.Dataset:
    d = Path(data_dir)
    if not d.is_dir():
        raise UsageError(f"data directory not found: {d}")
    missing = []
    for tid, proto in TRIAL_PROTOCOLS.items():
        f = d / f"trial_{tid}_{proto.value}.csv"
        if not f.exists():
            missing.append(f.name)
    if missing:
        raise UsageError(f"missing trial file(s) in {d}: {', '.join(missing)}")
    return telemetry.load_dataset(d, columns=columns)


def _load_model_checked(path: str):
    p = Path(path)
    if not p.exists():
        raise UsageError(f"model file not found: {p}")
    return model_io.load(p)


def _load_oracle_params(data_dir: str) -> OracleParams:
    f = Path(data_dir) / "oracle_params.json"
    if not f.exists():
        raise UsageError(f"oracle parameter file not found: {f} (generate data with 'gtep gen')")
    blob = json.loads(f.read_text())
    return OracleParams(**blob["params"])


def _emit(report: dict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(report, indent=2))
    else:
        _print_table(report)


def _print_table(report: dict, indent: str = "") -> None:
    width = max((len(k) for k in report), default=0)
    for key, val in report.items():
        if isinstance(val, dict):
            print(f"{indent}{key}:")
            _print_table(val, indent + "  ")
        elif isinstance(val, list) and val and isinstance(val[0], dict):
            for i, item in enumerate(val):
                print(f"{indent}{key}[{i}]:")
                _print_table(item, indent + "  ")
        elif isinstance(val, float):
            print(f"{indent}{key:<{width}}  {val:.6g}")
        else:
            print(f"{indent}{key:<{width}}  {val}")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_gen(cfg: dict) -> int:
    params = OracleParams(rho=cfg["rho"], base_power=cfg["base_power"],
                          k_v=cfg["k_v"], k_w=cfg["k_w"], k_a=cfg["k_a"],
                          noise_std=cfg["noise_std"], seed=cfg["seed"])
    ds = telemetry.make_dataset(params, cfg["samples_per_trial"], hold_power=cfg["hold_power"])
    out = Path(cfg["out"])
    paths = telemetry.write_dataset(ds, out)
    meta = {"schema": 1, "params": params.as_dict(),
            "samples_per_trial": cfg["samples_per_trial"], "hold_power": cfg["hold_power"],
            "stats": ds.stats.as_dict()}
    (out / "oracle_params.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"wrote {len(paths)} trial files + oracle_params.json to {out} "
          f"({sum(len(t) for t in ds.trials)} samples)")
    return 0


_FEATURE_MODES = {m.value: m for m in FeatureMode}


def _cmd_train(cfg: dict) -> int:
    if cfg["feature_mode"] not in _FEATURE_MODES:
        raise UsageError(f"unknown feature mode {cfg['feature_mode']!r} "
                         f"(choose from {sorted(_FEATURE_MODES)})")
    ds = _load_dataset_checked(cfg["data"], _column_mapping(cfg))
    tc = training.TrainConfig(
        lr=cfg["lr"], batch_size=cfg["batch_size"], max_epochs=cfg["epochs"],
        patience=cfg["patience"], dropout_p=cfg["dropout"], seed=cfg["seed"],
        feature_mode=_FEATURE_MODES[cfg["feature_mode"]], lag_norm=cfg["lag_norm"],
    )
    model = training.train(ds, tc)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    val_report = evaluation.evaluate(model, ds.trial(5), mode="teacher")
    model.metrics = {"val_trial_teacher": val_report.as_dict()}
    model_io.save(model, out)
    history_path = out.with_suffix(".history.csv")
    training.write_history_csv(model, history_path)
    model_io.export_json_meta(model, out.with_suffix(".json"))
    print(f"model: {out} ({model.mlp.dims}, best epoch {model.best_epoch}, "
          f"stopped after epoch {model.stop_epoch})")
    print(f"history: {history_path}")
    return 0


def _cmd_eval(cfg: dict) -> int:
    if cfg["mode"] not in ("teacher", "rollout", "corrected"):
        raise UsageError(f"unknown eval mode {cfg['mode']!r}")
    model = _load_model_checked(cfg["model"])
    ds = _load_dataset_checked(cfg["data"], _column_mapping(cfg))
    trial = ds.trial(cfg["trial"])
    report = evaluation.evaluate(model, trial, mode=cfg["mode"])
    blob = {"schema": 1, "trial": trial.id,
            "protocol": trial.protocol.value if trial.protocol else None,
            "mode": cfg["mode"], **report.as_dict()}
    _emit(blob, cfg["format"])
    if cfg["dump_dir"]:
        dump = Path(cfg["dump_dir"])
        dump.mkdir(parents=True, exist_ok=True)
        pred, actual = evaluation._PREDICTION_MODES[cfg["mode"]](model, trial)
        t = trial.t[len(trial) - len(pred):]
        with open(dump / "pairs.csv", "w", newline="\n") as f:
            f.write("t,actual_mw,pred_mw\n")
            for i in range(len(pred)):
                f.write(f"{float(t[i])!r},{float(actual[i])!r},{float(pred[i])!r}\n")
        res = pred - actual
        counts, edges = np.histogram(res, bins=50)
        with open(dump / "residual_hist.csv", "w", newline="\n") as f:
            f.write("bin_left_mw,bin_right_mw,count\n")
            for i, c in enumerate(counts):
                f.write(f"{float(edges[i])!r},{float(edges[i + 1])!r},{int(c)}\n")
        print(f"dumped pairs.csv and residual_hist.csv to {dump}")
    return 0


def _cmd_analyze(cfg: dict) -> int:
    ds = _load_dataset_checked(cfg["data"], _column_mapping(cfg))
    rows = []
    lag1s = []
    for trial in ds.trials:
        acf = evaluation.autocorrelation(trial.power, cfg["max_lag"])
        lag1s.append(float(acf[1]))
        rows.append({"trial": trial.id,
                     "protocol": trial.protocol.value if trial.protocol else None,
                     "lag1": float(acf[1]), "acf": [float(x) for x in acf]})
    mean_lag1 = float(np.mean(lag1s))
    blob = {"schema": 1, "max_lag": cfg["max_lag"], "mean_lag1": mean_lag1,
            "ar1_ceiling": evaluation.ar1_ceiling(mean_lag1),
            "trials": [{k: v for k, v in r.items() if k != "acf"} for r in rows]}
    params_file = Path(cfg["data"]) / "oracle_params.json"
    if params_file.exists():
        params = OracleParams(**json.loads(params_file.read_text())["params"])
        blob["oracle_ceiling"] = evaluation.oracle_ceiling(ds, params)
    _emit(blob, cfg["format"])
    if cfg["out_csv"]:
        with open(cfg["out_csv"], "w", newline="\n") as f:
            f.write("trial,protocol,lag,rho\n")
            for r in rows:
                for lag, rho in enumerate(r["acf"]):
                    f.write(f"{r['trial']},{r['protocol']},{lag},{float(rho)!r}\n")
        print(f"wrote ACF curves to {cfg['out_csv']}")
    return 0


def _cmd_ablate(cfg: dict) -> int:
    ds = _load_dataset_checked(cfg["data"])
    table = training.ablate(ds, seed=cfg["seed"])
    blob = {"schema": 1, "seed": cfg["seed"],
            "test_r2": {mode.value: r2 for mode, r2 in table.items()}}
    _emit(blob, cfg["format"])
    return 0


def _cmd_transfer(cfg: dict) -> int:
    model = _load_model_checked(cfg["model"])
    params = _load_oracle_params(cfg["data"])
    variants = evaluation.make_transfer_variants(
        params, n_robots=cfg["robots"], base_scale_max=cfg["base_scale_max"],
        noise_scale=cfg["noise_scale"])
    report = evaluation.transfer_study(model, variants, seed=cfg["seed"])
    blob = {"schema": 1, **report.as_dict()}
    _emit(blob, cfg["format"])
    return 0


def _cmd_bench(cfg: dict) -> int:
    model = _load_model_checked(cfg["model"])
    mean_us, p99_us = evaluation.latency_bench(model, n_steps=cfg["steps"],
                                               warmup=cfg["warmup"])
    blob = {"schema": 1, "steps": cfg["steps"], "mean_us": mean_us,
            "p99_us": p99_us, "throughput_hz": 1e6 / mean_us}
    _emit(blob, cfg["format"])
    return 0


def _cmd_predict(cfg: dict) -> int:
    if cfg["mode"] not in ("rollout", "corrected"):
        raise UsageError(f"unknown predict mode {cfg['mode']!r}")
    model = _load_model_checked(cfg["model"])
    cmd_path = Path(cfg["commands"])
    if not cmd_path.exists():
        raise UsageError(f"commands file not found: {cmd_path}")
    # corrected mode needs the measured power column; rollout only commands
    if cfg["mode"] == "corrected":
        trial = telemetry.load_csv(cmd_path)
    else:
        trial = telemetry.load_csv(cmd_path, columns=None) if _has_power_column(cmd_path) \
            else _load_commands_only(cmd_path)
    p = Predictor(model, dt=cfg["dt"])
    p.reset(cfg["initial_power"])
    preds = np.empty(len(trial))
    for i in range(len(trial)):
        if cfg["mode"] == "corrected":
            preds[i] = p.step_corrected(float(trial.v[i]), float(trial.w[i]),
                                        float(trial.power[i]))
        else:
            preds[i] = p.step(float(trial.v[i]), float(trial.w[i]))
    out = Path(cfg["out"])
    with open(out, "w", newline="\n") as f:
        f.write("t,power_mw\n")
        for i in range(len(preds)):
            f.write(f"{float(trial.t[i])!r},{float(preds[i])!r}\n")
    print(f"wrote {len(preds)} predictions to {out}")
    return 0


def _has_power_column(path: Path) -> bool:
    with open(path) as f:
        header = f.readline().strip().split(",")
    return "power_mw" in header


def _load_commands_only(path: Path) -> telemetry.Trial:
    """Commands CSV without power: header t,v,w."""
    from .exceptions import CsvParseError, CsvSchemaError

    lines = path.read_text().splitlines()
    if not lines or [h.strip() for h in lines[0].split(",")][:3] != ["t", "v", "w"]:
        raise CsvSchemaError(f"{path.name}: expected header t,v,w")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        try:
            rows.append((float(cells[0]), float(cells[1]), float(cells[2])))
        except (ValueError, IndexError):
            raise CsvParseError(lineno, f"malformed row {line!r}")
    if not rows:
        raise CsvSchemaError(f"{path.name}: no data rows")
    arr = np.array(rows)
    return telemetry.Trial(id=0, protocol=None, t=arr[:, 0], v=arr[:, 1],
                           w=arr[:, 2], power=np.ones(len(arr)))


_HANDLERS = {
    "gen": _cmd_gen, "train": _cmd_train, "eval": _cmd_eval, "analyze": _cmd_analyze,
    "ablate": _cmd_ablate, "transfer": _cmd_transfer, "bench": _cmd_bench,
    "predict": _cmd_predict,
}

_HELP = {
    "gen": "generate the six-trial synthetic dataset as CSV files",
    "train": "train a model on a dataset directory and save it",
    "eval": "evaluate a saved model on one trial",
    "analyze": "autocorrelation analysis and prediction ceilings",
    "ablate": "train one model per feature mode and compare test R^2",
    "transfer": "evaluate a model across perturbed-oracle robots",
    "bench": "single-step latency benchmark",
    "predict": "run the predictor over a commands CSV",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gtep", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="cmd", required=True)
    for cmd, opts in _DEFAULTS.items():
        p = sub.add_parser(cmd, help=_HELP[cmd])
        p.add_argument("--config", default=None, help="key=value config file")
        for dest, (default, parse) in opts.items():
            flag = "--" + dest.replace("_", "-")
            p.add_argument(flag, dest=dest, default=None,
                           type=str if parse is str else parse,
                           help=f"default: {default}")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args.cmd, args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    _print_effective(args.cmd, cfg)
    try:
        return _HANDLERS[args.cmd](cfg)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except GtepError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
