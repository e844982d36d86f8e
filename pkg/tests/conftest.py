import pytest

from gtep.telemetry import OracleParams, make_dataset
from gtep.training import TrainConfig, train


@pytest.fixture(scope="session")
def small_dataset():
    """Six trials of 1,200 samples: big enough to train against, fast enough
    for unit tests."""
    return make_dataset(OracleParams(), n_per_trial=1200)


@pytest.fixture(scope="session")
def small_model(small_dataset):
    return train(small_dataset, TrainConfig(seed=7, max_epochs=15))
