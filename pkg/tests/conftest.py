import numpy as np
import pytest

from sgkit.problem import build_system


def tiny_system(M=1, p=1, model="uniform", n=3, sigma=0.1, **kw):
    return build_system(model, M=M, p=p, sigma=sigma, mesh=(n, n), **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(20111017)


@pytest.fixture(scope="session")
def tiny():
    return tiny_system(1, 1)


@pytest.fixture(scope="session")
def small_uniform():
    return tiny_system(2, 2, n=4)


@pytest.fixture(scope="session")
def small_lognormal():
    return tiny_system(2, 2, model="lognormal", n=4, sigma=0.3)
