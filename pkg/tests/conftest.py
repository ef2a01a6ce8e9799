import numpy as np
import pytest

from app.gp.kernel import Hyperparameters, system_matrix
from app.harness.datasets import synthesize


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run acceptance-scale tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_dataset():
    """n=60, d=2 GP-prior draw"""
    return synthesize(60, 2, seed=3)


@pytest.fixture
def kernel_system(rng):
    """Well-conditioned kernel system with 5 right-hand sides"""

    def make(n=80, d=2, noise=0.5, columns=5, seed=None):
        local = np.random.default_rng(seed) if seed is not None else rng
        X = local.uniform(0.0, 1.0, size=(n, d))
        hyper = Hyperparameters.from_constrained(np.full(d, 0.3), 1.0, noise)
        H = system_matrix(X, hyper)
        B = local.standard_normal((n, columns))
        return H, B

    return make


@pytest.fixture
def csv_file(tmp_path):
    def write(text, name="data.csv"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write
