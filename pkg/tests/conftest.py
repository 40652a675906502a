import numpy as np
import pytest

from tgspec.ihoc import make_benchmark_problem
from tgspec.tgbasis import TGMap, build_grid


@pytest.fixture(scope="session")
def dcs():
    return make_benchmark_problem("dcs")


@pytest.fixture(scope="session")
def f16():
    return make_benchmark_problem("f16")


@pytest.fixture
def rg_grid():
    return build_grid(TGMap("rg", 2.0), 1.0, 12)


@pytest.fixture
def eg_grid():
    return build_grid(TGMap("eg", 1.5), 0.5, 12)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
