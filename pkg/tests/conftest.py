import pytest

from fronthaul_mux.dist import ModelParams

K_GRID = (1, 3, 5, 10, 20, 50, 100)


@pytest.fixture
def params():
    """mu = 5 users per RRU, a = b = 3.5."""
    return ModelParams()
