import numpy as np
import pytest
from hypothesis import settings

from vfp.grid import build_grid, sample_function

settings.register_profile("vfp", max_examples=40, deadline=None)
settings.load_profile("vfp")

SQRT2PI = np.sqrt(2 * np.pi)


def gauss(v, u=0.0, T=1.0):
    return np.exp(-(v - u) ** 2 / (2 * T)) / np.sqrt(2 * np.pi * T)


def bimodal(shift=1.0, T=0.5, amp=0.0):
    return lambda x, v: (1 + amp * np.sin(2 * np.pi * x)) * 0.5 * (gauss(v, shift, T) + gauss(v, -shift, T))


def sin_maxwellian(amp=0.5):
    return lambda x, v: (1 + amp * np.sin(2 * np.pi * x)) * gauss(v)


@pytest.fixture
def grid1():
    return build_grid(1, 32, 64, 8.0)


@pytest.fixture
def grid128():
    return build_grid(1, 32, 128, 8.0)


@pytest.fixture
def std_gauss(grid128):
    return sample_function(grid128, lambda x, v: gauss(v) + 0 * x)
