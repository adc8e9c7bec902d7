import numpy as np
import pytest

from minl2 import weights


@pytest.fixture
def unit_weight():
    return weights.constant(1.0, T=0.0)


@pytest.fixture
def half_rate_weight():
    return weights.exp_rate(0.5, T=0.0)


@pytest.fixture
def inverse_square_weight():
    # c(t) = 1/(1+t^2)
    return weights.rational([1.0], [1.0, 0.0, 1.0], T=0.0)


@pytest.fixture
def standard_grid():
    return np.linspace(0.01, 12.0, 241)
