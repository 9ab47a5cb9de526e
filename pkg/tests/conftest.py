import numpy as np
import pytest

from msoksq.data import ObservationAlphabet


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-seed experiment runs")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_simplex(rng, size):
    p = rng.random(size) + 1e-3
    return p / p.sum()


def binary_alphabet(values_neg, values_pos):
    return ObservationAlphabet.from_class_values([values_neg, values_pos], (-1, 1))
