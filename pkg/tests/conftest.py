import numpy as np
import pytest

from lfdepth import synth
from lfdepth.lightfield import LightField


@pytest.fixture(scope="session")
def two_plane():
    """96x96 two-plane scene (foreground 1.5 over background 0)."""
    return synth.render(synth.two_plane_scene(), 0)


@pytest.fixture(scope="session")
def plane_d1():
    return synth.render(synth.plane_scene(1.0), 0)


@pytest.fixture
def constant_lf():
    return LightField(np.full((3, 3, 8, 8, 3), 0.5, dtype=np.float32))


def step_image(h=16, w=16, col=8, lo=0.0, hi=1.0):
    img = np.full((h, w, 3), lo)
    img[:, col:] = hi
    return img
