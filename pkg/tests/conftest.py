import numpy as np
import pytest

from graphscatter.graph_core import ShiftVariant, build_shift, generate_small_world
from graphscatter.wavelets import WaveletFamily, build_bank


@pytest.fixture(scope="session")
def small_world():
    return generate_small_world(100, 0.5, 0.1, 1)


@pytest.fixture(scope="session")
def banks(small_world):
    return {f: build_bank(f, small_world) for f in WaveletFamily}


@pytest.fixture(scope="session")
def normalized_laplacian(small_world):
    return build_shift(small_world, ShiftVariant.NORMALIZED_LAPLACIAN)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

