import numpy as np
import pytest

from dpi5.model import build_from_table, build_synth1
from dpi5.smooth import extend_coefficients


def constant_operator(w=0.0, t1=-2.0, t2=1.0, n=41, m0=0):
    return build_from_table([(m0 + k, w, t1, t2) for k in range(n)])


@pytest.fixture(scope="session")
def synth100():
    op = build_synth1(100)
    return op, extend_coefficients(op, 100)


@pytest.fixture(scope="session")
def const_cc():
    op = constant_operator()
    return extend_coefficients(op, 20.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
