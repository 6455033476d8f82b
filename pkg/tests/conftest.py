import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gpexp.channel import Channel

settings.register_profile(
    "suite", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def mild_channel():
    """Binary state-dependent channel with lattice-friendly rows (d=4)."""
    w = np.array([
        [[0.75, 0.25], [0.5, 0.5]],
        [[0.25, 0.75], [0.25, 0.75]],
    ])
    return Channel(w=w, p_s=np.array([0.5, 0.5]))


@pytest.fixture(scope="session")
def sharp_channel():
    """Binary instance with off-lattice rows: all exponents positive at d=4."""
    w = np.array([
        [[0.9, 0.1], [0.8, 0.2]],
        [[0.15, 0.85], [0.3, 0.7]],
    ])
    return Channel(w=w, p_s=np.array([0.4, 0.6]))


@pytest.fixture(scope="session")
def dmc_channel():
    """Single-state channel: the state axis is degenerate."""
    w = np.array([[[0.8, 0.2]], [[0.3, 0.7]]])
    return Channel(w=w, p_s=np.array([1.0]))


@pytest.fixture(scope="session")
def coupled_design():
    """u = x coupling, state-independent; quantizes to I*_US = 0 designs."""
    d = np.zeros((2, 2, 2))
    d[:, 0, 0] = 0.5
    d[:, 1, 1] = 0.5
    return d


@pytest.fixture(scope="session")
def state_matched_design():
    """u = s coupling: only one auxiliary word matches each state sequence."""
    d = np.zeros((2, 2, 2))
    d[0, 0, 0] = 1.0
    d[1, 1, 0] = 1.0
    return d
