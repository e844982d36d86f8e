import json
import struct

import numpy as np
import pytest

from gtep import model_io, nn
from gtep.exceptions import (
    InvalidArgumentError,
    ModelFormatError,
    ModelLengthError,
    ModelVersionError,
)
from gtep.features import FeatureMode, Normalizer
from gtep.rng import Rng
from gtep.training import TrainConfig, TrainedModel, train


def random_model(seed=0, dims=(11, 64, 64, 32, 1), mode=FeatureMode.FULL):
    mlp = nn.init(dims, seed=seed)
    rng = Rng(seed, stream=5)
    norm = Normalizer(
        feature_means=rng.normals(dims[0]).astype(np.float32),
        feature_stds=(1.0 + rng.uniforms(dims[0])).astype(np.float32),
        target_mean=3652.0,
        target_std=700.0,
    )
    return TrainedModel(mlp=mlp, normalizer=norm, feature_mode=mode)


def test_save_load_save_byte_identical(tmp_path):
    model = random_model()
    p1, p2 = tmp_path / "a.gtep", tmp_path / "b.gtep"
    model_io.save(model, p1)
    back = model_io.load(p1)
    model_io.save(back, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_loaded_forward_bit_identical(tmp_path):
    model = random_model(seed=3)
    path = tmp_path / "m.gtep"
    model_io.save(model, path)
    back = model_io.load(path)
    x = Rng(9).normals(1000 * 11).reshape(1000, 11).astype(np.float32)
    assert np.array_equal(nn.forward(model.mlp, x), nn.forward(back.mlp, x))


def test_file_size_matches_expected(tmp_path):
    for dims in ((2, 1), (11, 64, 64, 32, 1), (7, 64, 64, 32, 1)):
        mode = FeatureMode.VELOCITY_PLUS_ONE_LAG if dims[0] == 7 else FeatureMode.FULL
        model = random_model(dims=dims, mode=mode)
        path = tmp_path / "m.gtep"
        model_io.save(model, path)
        assert path.stat().st_size == model_io.expected_size(dims)


def test_loaded_normalizer_matches(tmp_path):
    model = random_model(seed=4)
    path = tmp_path / "m.gtep"
    model_io.save(model, path)
    back = model_io.load(path)
    assert np.array_equal(back.normalizer.feature_means, model.normalizer.feature_means)
    assert np.array_equal(back.normalizer.feature_stds, model.normalizer.feature_stds)
    assert back.normalizer.target_mean == np.float32(model.normalizer.target_mean)
    assert back.feature_mode == model.feature_mode


def test_bad_magic(tmp_path):
    model = random_model()
    path = tmp_path / "m.gtep"
    model_io.save(model, path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(ModelFormatError, match="magic"):
        model_io.load(path)


def test_truncated_file(tmp_path):
    model = random_model()
    path = tmp_path / "m.gtep"
    model_io.save(model, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-1])
    with pytest.raises(ModelLengthError) as exc:
        model_io.load(path)
    assert exc.value.expected == len(raw)
    assert exc.value.actual == len(raw) - 1


def test_trailing_garbage_rejected(tmp_path):
    model = random_model()
    path = tmp_path / "m.gtep"
    model_io.save(model, path)
    path.write_bytes(path.read_bytes() + b"\0")
    with pytest.raises(ModelLengthError):
        model_io.load(path)


def test_version_mismatch(tmp_path):
    model = random_model()
    path = tmp_path / "m.gtep"
    model_io.save(model, path)
    raw = bytearray(path.read_bytes())
    struct.pack_into("<I", raw, 4, 99)
    path.write_bytes(bytes(raw))
    with pytest.raises(ModelVersionError):
        model_io.load(path)


def test_implausible_header(tmp_path):
    path = tmp_path / "m.gtep"
    path.write_bytes(b"GTEP" + struct.pack("<II", 1, 9999) + b"\0" * 64)
    with pytest.raises(ModelFormatError, match="layer count"):
        model_io.load(path)
    path.write_bytes(b"GT")
    with pytest.raises(ModelLengthError):
        model_io.load(path)


def test_nonfinite_parameters_rejected(tmp_path):
    model = random_model()
    model.mlp.weights[1][0, 0] = np.nan
    with pytest.raises(InvalidArgumentError):
        model_io.save(model, tmp_path / "m.gtep")


def test_velocity_mode_round_trip(tmp_path):
    model = random_model(dims=(6, 64, 64, 32, 1), mode=FeatureMode.VELOCITY_ONLY)
    path = tmp_path / "m.gtep"
    model_io.save(model, path)
    back = model_io.load(path)
    assert back.feature_mode == FeatureMode.VELOCITY_ONLY
    assert back.mlp.dims == (6, 64, 64, 32, 1)


def test_trained_model_round_trip_predictions(tmp_path, small_dataset, small_model):
    from gtep.evaluation import predictions_teacher

    path = tmp_path / "m.gtep"
    model_io.save(small_model, path)
    back = model_io.load(path)
    a, _ = predictions_teacher(small_model, small_dataset.trial(6))
    b, _ = predictions_teacher(back, small_dataset.trial(6))
    assert np.array_equal(a, b)


def test_documented_toy_model_bytes(tmp_path):
    # the worked hex example in docs/model_format.md, byte for byte
    golden_hex = (
        "4754455001000000010000000200000001000000000000000000003f000080bf"
        "00000040000080400040644500002f440000c03f000000c00000803e"
    )
    path = tmp_path / "toy.gtep"
    path.write_bytes(bytes.fromhex(golden_hex))
    model = model_io.load(path)
    assert model.mlp.dims == (2, 1)
    assert np.array_equal(model.mlp.weights[0], [[1.5, -2.0]])
    assert model.mlp.biases[0][0] == 0.25
    assert np.array_equal(model.normalizer.feature_means, [0.5, -1.0])
    assert np.array_equal(model.normalizer.feature_stds, [2.0, 4.0])
    assert model.normalizer.target_mean == 3652.0
    raw = np.array([1.0, 2.0])
    z = model.normalizer.normalize(raw).astype(np.float32)
    assert nn.forward(model.mlp, z) == -0.875
    assert model.normalizer.denormalize_target(np.float32(-0.875)) == 3039.5
    # re-save reproduces the documented bytes exactly
    out = tmp_path / "resaved.gtep"
    model_io.save(model, out)
    assert out.read_bytes().hex() == golden_hex


def test_json_sidecar(tmp_path, small_dataset):
    model = train(small_dataset, TrainConfig(seed=1, max_epochs=2))
    path = tmp_path / "m.json"
    model_io.export_json_meta(model, path)
    meta = json.loads(path.read_text())
    assert meta["dims"] == [11, 64, 64, 32, 1]
    assert meta["param_count"] == 7041
    assert meta["feature_order"] == ["v", "w", "dv", "dw", "abs_v", "abs_w",
                                     "p_lag1", "p_lag2", "p_lag3", "p_lag4", "p_lag5"]
    assert meta["training"]["batch_size"] == 256
    assert "best_epoch" in meta and "stop_epoch" in meta
