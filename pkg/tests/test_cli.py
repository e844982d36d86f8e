import json

import numpy as np
import pytest

from gtep.cli import main


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Small generated dataset plus a quickly trained model file."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert main(["gen", "--out", str(data), "--samples-per-trial", "600",
                 "--seed", "5"]) == 0
    model = root / "model.gtep"
    assert main(["train", "--data", str(data), "--out", str(model),
                 "--epochs", "4", "--seed", "1"]) == 0
    return root


def test_gen_outputs(workdir):
    data = workdir / "data"
    files = sorted(p.name for p in data.glob("trial_*.csv"))
    assert files == ["trial_1_structured.csv", "trial_2_goal_nav.csv",
                     "trial_3_accel_var.csv", "trial_4_extremes.csv",
                     "trial_5_random_walk.csv", "trial_6_steady_state.csv"]
    meta = json.loads((data / "oracle_params.json").read_text())
    assert meta["schema"] == 1
    assert meta["params"]["rho"] == 0.95
    rows = sum(len(p.read_text().splitlines()) - 1 for p in data.glob("trial_*.csv"))
    assert rows == 3600


def test_gen_row_count(tmp_path):
    out = tmp_path / "d"
    assert main(["gen", "--out", str(out), "--samples-per-trial", "100"]) == 0
    rows = sum(len(p.read_text().splitlines()) - 1 for p in out.glob("trial_*.csv"))
    assert rows == 600


def test_gen_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["gen", "--out", str(out), "--samples-per-trial", "120",
                     "--seed", "3"]) == 0
    for fa in sorted(a.glob("*.csv")):
        assert fa.read_bytes() == (b / fa.name).read_bytes()


def test_effective_config_line(workdir, capsys):
    assert main(["analyze", "--data", str(workdir / "data"), "--max-lag", "3"]) == 0
    out = capsys.readouterr().out
    line = [l for l in out.splitlines() if l.startswith("effective-config:")][0]
    assert "cmd=analyze" in line and "max_lag=3" in line and "format=text" in line


def test_train_writes_model_history_sidecar(workdir):
    model = workdir / "model.gtep"
    assert model.exists()
    history = workdir / "model.history.csv"
    assert history.read_text().splitlines()[0] == "epoch,train_loss,val_loss"
    meta = json.loads((workdir / "model.json").read_text())
    assert meta["param_count"] == 7041
    assert meta["dims"] == [11, 64, 64, 32, 1]


def test_train_missing_trial_file(tmp_path, capsys):
    data = tmp_path / "d"
    assert main(["gen", "--out", str(data), "--samples-per-trial", "60"]) == 0
    victim = data / "trial_3_accel_var.csv"
    victim.unlink()
    rc = main(["train", "--data", str(data), "--out", str(tmp_path / "m.gtep")])
    assert rc == 2
    assert "trial_3_accel_var.csv" in capsys.readouterr().err


def test_train_feature_mode_vel(workdir, tmp_path):
    out = tmp_path / "vel.gtep"
    assert main(["train", "--data", str(workdir / "data"), "--out", str(out),
                 "--epochs", "2", "--feature-mode", "vel"]) == 0
    meta = json.loads(out.with_suffix(".json").read_text())
    assert meta["dims"][0] == 6


def test_eval_json(workdir, capsys):
    assert main(["eval", "--model", str(workdir / "model.gtep"),
                 "--data", str(workdir / "data"), "--mode", "corrected",
                 "--format", "json"]) == 0
    out = capsys.readouterr().out
    payload = json.loads(out[out.index("{"):])
    assert payload["schema"] == 1
    assert payload["mode"] == "corrected"
    assert payload["trial"] == 6
    assert set(payload) >= {"r2", "mae_mw", "mape_pct", "n"}


def test_eval_dump_csvs(workdir, tmp_path):
    dump = tmp_path / "dump"
    assert main(["eval", "--model", str(workdir / "model.gtep"),
                 "--data", str(workdir / "data"), "--dump-dir", str(dump)]) == 0
    pairs = (dump / "pairs.csv").read_text().splitlines()
    assert pairs[0] == "t,actual_mw,pred_mw"
    assert len(pairs) == 1 + 600 - 5
    hist = (dump / "residual_hist.csv").read_text().splitlines()
    assert hist[0] == "bin_left_mw,bin_right_mw,count"
    counts = sum(int(l.split(",")[2]) for l in hist[1:])
    assert counts == 595


def test_eval_missing_model(workdir, capsys):
    rc = main(["eval", "--model", "/nonexistent/m.gtep", "--data", str(workdir / "data")])
    assert rc == 2
    assert "not found" in capsys.readouterr().err


def test_analyze_json_and_csv(workdir, tmp_path, capsys):
    out_csv = tmp_path / "acf.csv"
    assert main(["analyze", "--data", str(workdir / "data"), "--max-lag", "4",
                 "--format", "json", "--out-csv", str(out_csv)]) == 0
    out = capsys.readouterr().out
    payload = json.loads(out[out.index("{"):out.rindex("}") + 1])
    assert payload["schema"] == 1
    assert len(payload["trials"]) == 6
    assert 0 < payload["mean_lag1"] <= 1
    assert payload["ar1_ceiling"] == pytest.approx(payload["mean_lag1"] ** 2)
    assert "oracle_ceiling" in payload
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "trial,protocol,lag,rho"
    assert len(lines) == 1 + 6 * 5


def test_bench_output(workdir, capsys):
    assert main(["bench", "--model", str(workdir / "model.gtep"),
                 "--steps", "1000", "--warmup", "100", "--format", "json"]) == 0
    out = capsys.readouterr().out
    payload = json.loads(out[out.index("{"):])
    assert payload["mean_us"] > 0
    assert payload["throughput_hz"] == pytest.approx(1e6 / payload["mean_us"])


def test_transfer_cli(workdir, capsys):
    assert main(["transfer", "--model", str(workdir / "model.gtep"),
                 "--data", str(workdir / "data"), "--robots", "2",
                 "--seed", "1", "--format", "json"]) == 0
    out = capsys.readouterr().out
    payload = json.loads(out[out.index("{"):])
    assert len(payload["robots"]) == 2
    assert "mean_r2" in payload and "std_r2" in payload


def test_predict_rollout(workdir, tmp_path):
    cmds = tmp_path / "cmds.csv"
    lines = ["t,v,w"] + [f"{i / 30.0!r},0.1,0.5" for i in range(50)]
    cmds.write_text("\n".join(lines) + "\n")
    out = tmp_path / "power.csv"
    assert main(["predict", "--model", str(workdir / "model.gtep"),
                 "--commands", str(cmds), "--out", str(out),
                 "--initial-power", "3500"]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "t,power_mw"
    assert len(rows) == 51
    powers = [float(r.split(",")[1]) for r in rows[1:]]
    assert all(np.isfinite(powers))


def test_predict_corrected_uses_measurements(workdir, tmp_path):
    src = workdir / "data" / "trial_6_steady_state.csv"
    out = tmp_path / "corr.csv"
    assert main(["predict", "--model", str(workdir / "model.gtep"),
                 "--commands", str(src), "--out", str(out),
                 "--mode", "corrected"]) == 0
    assert len(out.read_text().splitlines()) == 601


def test_config_file_and_env_precedence(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "gtep.cfg"
    cfg.write_text("samples_per_trial = 70\nseed = 9\n")
    monkeypatch.setenv("GTEP_SAMPLES_PER_TRIAL", "80")
    out = tmp_path / "d"
    # flag > config > env > default: flag seed wins, config samples wins over env
    assert main(["gen", "--out", str(out), "--config", str(cfg), "--seed", "2"]) == 0
    line = [l for l in capsys.readouterr().out.splitlines()
            if l.startswith("effective-config:")][0]
    assert "seed=2" in line
    assert "samples_per_trial=70" in line
    rows = len((out / "trial_1_structured.csv").read_text().splitlines()) - 1
    assert rows == 70


def test_env_fallback(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("GTEP_SAMPLES_PER_TRIAL", "80")
    out = tmp_path / "d"
    assert main(["gen", "--out", str(out)]) == 0
    line = [l for l in capsys.readouterr().out.splitlines()
            if l.startswith("effective-config:")][0]
    assert "samples_per_trial=80" in line


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main(["gen"]) == 2  # missing --out
    assert "out" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["gen", "--no-such-flag"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        main(["bogus-subcommand"])
    assert main(["eval", "--model", "x", "--data", "y", "--mode", "bogus"]) == 2


def test_runtime_errors_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.gtep"
    bad.write_bytes(b"XXXX" + b"\0" * 64)
    rc = main(["bench", "--model", str(bad), "--steps", "1000"])
    assert rc == 1
    assert "magic" in capsys.readouterr().err
