import numpy as np
import pytest
from hypothesis import settings

from topoqn.mesh import build_crossed_grid

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20231016)


@pytest.fixture(scope="session")
def unit16():
    return build_crossed_grid(16, 16, (0.0, 1.0, 0.0, 1.0))


@pytest.fixture(scope="session")
def clover16():
    return build_crossed_grid(16, 16, (-2.0, 2.0, -2.0, 2.0))
