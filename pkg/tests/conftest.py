import numpy as np
import pytest

from geodenoise.image import Image


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_image(rng):
    return Image(rng.uniform(0.0, 255.0, (16, 16)))


@pytest.fixture
def gradient_image():
    ii, jj = np.meshgrid(np.arange(12), np.arange(12), indexing="ij")
    return Image((ii * 12 + jj) * 255.0 / 143.0)
