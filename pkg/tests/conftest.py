import numpy as np
import pytest
from hypothesis import settings

from vthb.harness.config import RunConfig, SyntheticData

settings.register_profile("default", deadline=None)
settings.load_profile("default")


@pytest.fixture
def small_cfg():
    """A desk-scale run configuration that builds its index in well under a second."""
    return RunConfig(synthetic=SyntheticData(n=3000, dim=16), max_vectors=3000, horizon=500)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
