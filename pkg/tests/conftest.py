import numpy as np
import pytest

from renewal_lab import Exponential, Gamma, ShiftedPareto, Uniform

ALL_KINDS = [
    Exponential(1.0),
    Gamma(2.0, 1.0),
    Uniform(0.0, 2.0),
    ShiftedPareto(3.5, 1.0),
]


@pytest.fixture(params=ALL_KINDS, ids=lambda d: d.kind)
def dist(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
