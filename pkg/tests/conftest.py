import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ci")


def unit_gaussian(*x):
    return np.exp(-0.5 * sum(c * c for c in x))


@pytest.fixture
def gauss():
    return unit_gaussian
