import math

import pytest

from cintlab.scene import scene_from_dict, derive_scales

BASE = dict(
    lambda0=1.0,
    L=2.0e4,
    a=2.0e4 / (2.0 * math.pi),
    N=400,
    ell=2.0e4 / (4.0 * math.pi),
    sigma_tau=0.0,
    sigma_W=0.0,
    reflectors=[[133.0, 2.2], [123.0, 1.3], [143.0, 0.8]],
    domain=[0.0, 245.0],
    grid_dy=0.03,
    seed=0,
)


def make_scene(**overrides):
    cfg = dict(BASE)
    cfg.update(overrides)
    return scene_from_dict(cfg)


@pytest.fixture
def scene_clean():
    """Homogeneous, noiseless three-reflector scene."""
    return make_scene()


@pytest.fixture
def scene_random():
    """Distorted scene: sigma_tau = 3.1 with 10% additive noise."""
    return make_scene(sigma_tau=3.1, sigma_W=0.1)


@pytest.fixture
def scales_random(scene_random):
    return derive_scales(scene_random)
