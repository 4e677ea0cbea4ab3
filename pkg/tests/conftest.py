import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sosgap.boolcore import XorInstance

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# Tseitin system on K4: one variable per edge, odd total charge.
K4 = [(0, 1, 2, 1), (0, 3, 4, 1), (1, 3, 5, 1), (2, 4, 5, -1)]


@pytest.fixture
def k4():
    return XorInstance.from_lists(6, K4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
