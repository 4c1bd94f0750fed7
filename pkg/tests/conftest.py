from __future__ import annotations

import numpy as np
import pytest

from kleinball.groups import complex_fuchsian, cyclic_loxodromic, real_fuchsian_triangle, sanov_group, trivial_group
from kleinball.orbit import enumerate_orbit


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def trivial_orbit():
    return enumerate_orbit(trivial_group(), 5, 5.0)


@pytest.fixture(scope="session")
def cyclic10():
    return enumerate_orbit(cyclic_loxodromic(1.0), 10, 10.0)


@pytest.fixture(scope="session")
def sanov10():
    return enumerate_orbit(sanov_group(), 10_000, 10.0)


@pytest.fixture(scope="session")
def real8():
    return enumerate_orbit(real_fuchsian_triangle(2, 3, 7), 10_000, 8.0)


@pytest.fixture(scope="session")
def complex4():
    return enumerate_orbit(complex_fuchsian(2, 3, 7), 10_000, 4.0)


def random_isometry(rng, n=2, size=1.0):
    """exp of a random element of u(n, 1), via scipy."""
    from scipy.linalg import expm

    from kleinball.hyperbolic import form_matrix

    d = n + 1
    x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    j = form_matrix(n)
    k = x - j @ x.conj().T @ j
    return expm(size * k / np.abs(k).max())


def random_ball(rng, n=2, rmax=0.9):
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v) * rmax * rng.random()
