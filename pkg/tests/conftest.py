import numpy as np
import pytest

from thinfilm import grid as gridmod


@pytest.fixture(scope="session")
def default_grid():
    return gridmod.LogGrid()


@pytest.fixture(scope="session")
def fine_grid():
    return gridmod.LogGrid(-12.0, 4.0, 2049)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def gaussian_bump(grid, center=-4.0, width=0.8, amplitude=1.0):
    """Gaussian profile cut to exact compact support by a C^2 window."""
    s = grid.s
    window = (_smoothstep((s - grid.s_min - 0.5) / 1.5)
              * _smoothstep((grid.s_max - 0.5 - s) / 1.5))
    profile = np.exp(-((s - center) ** 2) / (2.0 * width**2))
    return gridmod.GridFunction(grid, amplitude * profile * window)
