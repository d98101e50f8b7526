import numpy as np
import pytest

import texinpaint as ti


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def checkerboard(size=128, cell=8, colors=((220, 40, 70), (30, 200, 120))):
    """Two-color checkerboard image array (size, size, 3) uint8."""
    n = size // cell
    tile = (np.arange(n)[:, None] + np.arange(n)) % 2
    tile = np.kron(tile, np.ones((cell, cell), dtype=int))
    a, b = np.array(colors[0]), np.array(colors[1])
    img = np.where(tile[..., None] == 0, a, b)
    return img.astype(np.uint8)


def tiny_net(seed=3, widths=(4, 4, 6), pools_after=(1, 2),
             stats=("conv1_1", "pool1", "conv3_1")):
    return ti.random_network(seed, ti.small_topology(widths, pools_after),
                             statistics_layers=stats)
