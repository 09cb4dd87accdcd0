import numpy as np
import pytest

from mbol.scenario import desk_scenario


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config():
    return desk_scenario(n_rf=4, n_beams=2)


def random_phases(rng, *shape):
    return np.exp(2j * np.pi * rng.uniform(size=shape))


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
