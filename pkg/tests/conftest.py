import numpy as np
import pytest
from hypothesis import settings

from nearcloak.forward import CloakConfig
from nearcloak.geometry import parse_shape

settings.register_profile("repo", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("repo")


@pytest.fixture
def disks():
    return CloakConfig("disks", 1, "cos", r_i=1.0, r_e=2.0)


@pytest.fixture
def ellipses():
    return CloakConfig("ellipses", 1, "cos", l=1.0, xi_i=0.5, xi_e=1.0)


@pytest.fixture
def f_cos4():
    return parse_shape("-cos4")


@pytest.fixture
def ring3():
    theta = 2 * np.pi * np.arange(64) / 64
    return 3.0 * np.stack([np.cos(theta), np.sin(theta)], -1)
