import numpy as np
import pytest

from delayed_gd.problems import constants_of, gen_classification_data, gen_pl_data, gen_regression_data
from delayed_gd.serialize import load_dataset, save_dataset

SEED = 0


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("datasets")


def _serialized(data_dir, name, problem):
    path = save_dataset(problem, data_dir / f"{name}.json")
    return load_dataset(path)


@pytest.fixture(scope="session")
def ridge(data_dir):
    return _serialized(data_dir, "ridge", gen_regression_data(1000, 10, SEED))


@pytest.fixture(scope="session")
def logistic(data_dir):
    return _serialized(data_dir, "logistic", gen_classification_data(1000, 10, SEED))


@pytest.fixture(scope="session")
def pl_problem(data_dir):
    return _serialized(data_dir, "pl", gen_pl_data(6, 15, SEED))


@pytest.fixture(scope="session")
def ridge_consts(ridge):
    return constants_of(ridge)


@pytest.fixture(scope="session")
def logistic_consts(logistic):
    return constants_of(logistic)


@pytest.fixture(scope="session")
def pl_consts(pl_problem):
    return constants_of(pl_problem)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
