"""Shared fixtures for the euler_spectra test suite.

Grids are cheap to build but reused constantly, so the common sizes are
session-scoped.  Random data always comes from `default_rng` with a fixed
seed so failures reproduce bit-for-bit.
"""

import numpy as np
import pytest

from euler_spectra.grid import Grid
from euler_spectra.fields import VectorField, fft_forward, leray_project, dealias_23


@pytest.fixture(scope="session")
def grid8():
    return Grid(8)


@pytest.fixture(scope="session")
def grid16():
    return Grid(16)


@pytest.fixture(scope="session")
def grid32():
    return Grid(32)


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)


def make_random_velocity(grid, rng, scale=1.0):
    """Random smooth divergence-free dealiased velocity in spectral space."""
    comps = tuple(
        scale * rng.standard_normal((grid.n,) * 3) for _ in range(3)
    )
    v = VectorField.physical(grid, comps)
    vhat = fft_forward(v)
    # Damp high modes so derived quantities stay O(1) and well resolved.
    damp = np.exp(-0.5 * grid.k_squared / 9.0)
    vhat = VectorField.spectral(
        grid, tuple(c.values * damp for c in vhat.components)
    )
    return dealias_23(leray_project(vhat))
