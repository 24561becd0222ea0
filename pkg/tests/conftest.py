import pytest

from finsurrogate.nn import DenseConfig, LstmConfig
from finsurrogate.synthdata import DatasetGrid, generate_dataset

TINY = {"dense": DenseConfig(layers=1, nodes=6, dropout=0.0, learning_rate=0.01, batch_size=64, epochs=2),
        "recurrent": LstmConfig(hidden_units=3, dropout=0.0, learning_rate=0.01, batch_size=8, epochs=2)}


@pytest.fixture(scope="session")
def small_dataset():
    return generate_dataset(DatasetGrid(runs_per_setting=4, cycles_per_run=2, n_steps_per_cycle=64), seed=11)


@pytest.fixture(scope="session")
def default_dataset():
    return generate_dataset(seed=0)


@pytest.fixture(scope="session")
def tiny():
    return dict(TINY)
