import numpy as np
import pytest

from sestream.sde import BbedParams
from sestream.spectral import StftConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def stft_cfg():
    return StftConfig()


@pytest.fixture
def bbed():
    return BbedParams()


def complex_randn(rng, shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
