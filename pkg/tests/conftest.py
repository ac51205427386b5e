import numpy as np
import pytest

from oobci import Dataset, ForestConfig, train_forest, tree_prediction_matrix
from oobci._backend import BACKENDS
from oobci.sim import generate_dataset


@pytest.fixture(params=sorted(BACKENDS))
def kernels(request):
    return BACKENDS[request.param]


@pytest.fixture(scope="session")
def reg_data():
    train, _ = generate_dataset(40, 4, 2.0, "regression", seed=11, n_test=1)
    return train


@pytest.fixture(scope="session")
def cls_data():
    train, _ = generate_dataset(40, 4, 2.0, "classification", seed=12, n_test=1)
    return train


@pytest.fixture(scope="session")
def reg_forest(reg_data):
    model = train_forest(reg_data, ForestConfig(B=300, seed=3))
    return model, tree_prediction_matrix(model)


@pytest.fixture(scope="session")
def cls_forest(cls_data):
    model = train_forest(cls_data, ForestConfig(B=300, seed=4))
    return model, tree_prediction_matrix(model)


def toy_dataset(n, seed=0, task="regression", p=2):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    if task == "classification":
        y = (np.arange(n) % 2).astype(float)
        rng.shuffle(y)
    else:
        y = 3.0 * rng.standard_normal(n)
    return Dataset(X, y, task)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
