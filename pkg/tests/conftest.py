"""Shared pytest fixtures for srradar tests.

Provides seeded generators and probing signals for the fast unit layer,
and the gate for the slow experiment layer (full-scale sweeps that take
minutes rather than milliseconds).
"""

import os

import numpy as np
import pytest

from srradar.signal import random_probing


def _slow_enabled() -> bool:
    """Check if the slow experiment layer was requested."""
    return os.environ.get("SRRADAR_SLOW", "") not in ("", "0")


# ---------------------------------------------------------------------------
# Randomness
# ---------------------------------------------------------------------------

@pytest.fixture
def rng():
    """Function-scoped generator with a fixed seed."""
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def probe15():
    """Real Gaussian probing signal, L = 15."""
    return random_probing(15, 15)


@pytest.fixture(scope="session")
def probe21():
    """Real Gaussian probing signal, L = 21."""
    return random_probing(21, 21)


# ---------------------------------------------------------------------------
# Slow layer: requires SRRADAR_SLOW=1
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def slow():
    """Skip unless SRRADAR_SLOW is set.

    Tests requesting this fixture run the experiment-scale acceptance
    checks (hundreds of solves each).
    """
    if not _slow_enabled():
        pytest.skip("SRRADAR_SLOW not set, skipping experiment-scale tests")
