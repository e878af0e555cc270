import math

import numpy as np
import pytest
from hypothesis import strategies as st

from monokernel.core import ReducedModel


def log_uniform(lo, hi):
    return st.floats(math.log(lo), math.log(hi)).map(math.exp)


R_values = log_uniform(0.05, 20.0)
rho_values = st.floats(-1.0, 1.0)
models = st.builds(ReducedModel, R_values, rho_values)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(20240601))
