"""
Shared fixtures: seeded generators, a tiny fusion configuration and its grid.
"""

import numpy as np
import pytest

from models.fusion import FusionConfig
from models.grid import GridSpec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def omnihd():
    return GridSpec.preset("omnihd")


@pytest.fixture
def desk():
    return GridSpec.preset("desk")


@pytest.fixture
def tiny_cfg():
    """C=4, H=5, W=6, Z=2, two heads of two points, T=2, K=4."""
    return FusionConfig(
        channels=4, height=5, width=6, depth=2, heads=2, points=2, frames=2,
        num_classes=4, gate_layers=1, encoder_layers=1, bottleneck_layers=1,
        head_layers=2, image_stride=4,
    )


@pytest.fixture
def tiny_grid():
    """6 x 5 x 2 one-meter voxels; volume shape (H, W, Z) = (5, 6, 2)."""
    return GridSpec(x_range=(0.0, 6.0), y_range=(0.0, 5.0), z_range=(0.0, 2.0), voxel_size=1.0)
