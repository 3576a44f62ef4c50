import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def compositions(rng):
    """Strictly positive 10-part compositions, one per row."""
    return rng.dirichlet(np.ones(10), size=300)
