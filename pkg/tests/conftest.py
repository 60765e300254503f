import numpy as np
import pytest

from scatteruq.surfaces import build_landmarks, builtin_surface, reference_surface


@pytest.fixture(scope="session")
def torus():
    return builtin_surface("torus")


@pytest.fixture(scope="session")
def sphere():
    return builtin_surface("sphere")


@pytest.fixture(scope="session")
def cuboid():
    return builtin_surface("cuboid", half_width=2.0)


@pytest.fixture(scope="session")
def sphere_q16(sphere):
    return reference_surface(build_landmarks(sphere, 16))


@pytest.fixture(scope="session")
def torus_q10_landmarks(torus):
    return build_landmarks(torus, 10)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
