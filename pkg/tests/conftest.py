import numpy as np
import pytest

from cylmap.returnmap import MapParams
from cylmap.system import SystemParams, derive_constants


@pytest.fixture
def params_std():
    """Reference system parameters used across the suite."""
    return SystemParams(alpha=1.0, beta=-0.1, gamma=0.0, omega=1.0)


@pytest.fixture
def dc_std(params_std):
    return derive_constants(params_std)


@pytest.fixture
def mp_fig9():
    """Map-level bundle of the numeric atlas: K = 3, delta = 1.1, omega = 1."""
    return MapParams(K=3.0, delta=1.1, omega=1.0, gamma=0.02, k1=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
