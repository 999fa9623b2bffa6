import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bhfluid.lattice import LatticeConfig, device_config  # noqa: E402


@pytest.fixture(scope="session")
def device():
    return device_config()


@pytest.fixture
def chain4():
    """Small inhomogeneous chain with both stagger profiles."""
    return LatticeConfig(
        L=4,
        J=[50.0, 55.0, 47.0],
        U=[-900.0, -880.0, -910.0, -890.0],
        delta_large=[-800.0, 700.0, -450.0, 1100.0],
        delta_small=[-300.0, 250.0, -150.0, 420.0],
        gamma1=[0.05, 0.02, 0.03, 0.04],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

