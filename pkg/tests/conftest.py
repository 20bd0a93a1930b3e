import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("cife", deadline=None, max_examples=60)
settings.load_profile("cife")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
