import pytest

from wbansim.config import SimConfig


@pytest.fixture
def cfg():
    """Small, fast configuration for unit-level engine runs."""
    return SimConfig(duration_s=5.0, seed=1)
