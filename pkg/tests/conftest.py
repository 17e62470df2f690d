"""
Pytest configuration and shared fixtures for rfim_lab tests.

This module provides:
- Test markers configuration (slow statistical runs, exhaustive oracles)
- Shared fixtures for couplings, disorder parameters and small regions
"""

import os
import sys

import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from rfim_lab.disorder import DisorderParams
from rfim_lab.lattice import ORIGIN, CouplingSpec, ball

# Statistical test sizes can be raised from the environment
TEST_REPLICAS = int(os.environ.get("RFIM_TEST_REPLICAS", "200"))


def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line(
        "markers",
        "slow: mark test as slow running (statistical sample sizes)"
    )
    config.addinivalue_line(
        "markers",
        "oracle: mark test as using exhaustive enumeration"
    )


@pytest.fixture
def nn():
    """Nearest-neighbour coupling with J = 1."""
    return CouplingSpec.nearest_neighbor(1.0)


@pytest.fixture
def range2():
    """Isotropic coupling J = 1 on |dx| + |dy| <= 2."""
    return CouplingSpec.isotropic(1.0, 2)


@pytest.fixture
def ground():
    """h = 0, epsilon = 1, T = 0."""
    return DisorderParams(0.0, 1.0, 0.0)


@pytest.fixture
def hot():
    """h = 0, epsilon = 1, T = 1."""
    return DisorderParams(0.0, 1.0, 1.0)


@pytest.fixture
def small_ball():
    """ball(0, 2): 13 sites."""
    return ball(ORIGIN, 2)
