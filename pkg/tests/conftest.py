import numpy as np
import pytest
from hypothesis import settings

from tsapolar.channel import blackwell_optimal_structure

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def blackwell():
    return blackwell_optimal_structure()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
