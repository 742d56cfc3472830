import numpy as np
import pytest

from obsched.source import bivariate


@pytest.fixture
def table_source():
    return bivariate(5.0, 7.0, 0.6)


@pytest.fixture
def unit_source():
    return bivariate(1.0, 1.0, 0.0)


def within_stderr(value, target, stderr, k=3.0):
    return abs(value - target) <= k * stderr


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
