import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ctinfo import Image2D


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def textured_image(rng):
    """A 64x64 normalized image with smooth texture, full mask."""
    from scipy import ndimage

    base = ndimage.gaussian_filter(rng.standard_normal((64, 64)), 2.0)
    base = (base - base.min()) / (base.max() - base.min())
    return Image2D(base)


def as_image(values, mask=None):
    return Image2D(np.asarray(values, dtype=float), mask)
