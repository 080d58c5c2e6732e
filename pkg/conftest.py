"""Shared pytest fixtures and the --runslow switch for long Monte Carlo checks."""

import numpy as np
import pytest

from regimecast.config import ModelConfig
from regimecast.dgp import default_test_params, simulate_msvecm


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow Monte Carlo tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running Monte Carlo oracle (needs --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def fixture_params():
    return default_test_params()


@pytest.fixture(scope="session")
def fixture_data(fixture_params):
    """Default fixture simulated for 150 periods with seed 42: (dataset, true states)."""
    return simulate_msvecm(fixture_params, 150, np.random.default_rng(42))


@pytest.fixture
def small_config():
    """Default fixture dimensions with a short chain."""
    return ModelConfig(m=3, r=1, P=1, n_draws=40, n_burn=20)
