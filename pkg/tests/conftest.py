import numpy as np
import pytest

from helpers import make_grid


@pytest.fixture
def open_grid():
    """32x32 all-ocean grid with 1.3 km cells."""
    return make_grid()


@pytest.fixture
def coast_grid():
    """32x32 grid with a land band along the first rows."""
    return make_grid(land="coast")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
