import numpy as np
import pytest

from mobman.model import load_reference_model
from mobman.wbc import WbcParams


@pytest.fixture(scope="session")
def model():
    return load_reference_model()


@pytest.fixture(scope="session")
def params():
    return WbcParams()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_config(model, rng, margin: float = 0.0):
    """Uniform in-limit configuration; unbounded base DoFs draw from [-1, 1]."""
    lo, hi = model.pos_limits
    lo = np.where(np.isfinite(lo), lo + margin, -1.0)
    hi = np.where(np.isfinite(hi), hi - margin, 1.0)
    return rng.uniform(lo, hi)
