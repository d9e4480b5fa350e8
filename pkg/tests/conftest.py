import numpy as np
import pytest

from torusgas.grid import Grid


@pytest.fixture
def grid1d():
    return Grid((64,))


@pytest.fixture
def grid2d():
    return Grid((64, 64))


@pytest.fixture
def rng():
    return np.random.default_rng(0xA11CE)
