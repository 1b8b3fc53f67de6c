"""Initial velocity fields: classical benchmarks and random ensembles.

Every generator returns a *spectral*, solenoidally-projected, dealiased
VectorField, ready to hand to the solver.  Generators are deterministic:
the same arguments (and seed, where applicable) reproduce the same field
bit for bit.
"""

import numpy as np

from euler_spectra.deformation import (
    Classification,
    classify_admissible,
    deformation_tensor,
    eigenvalues_sym3,
)
from euler_spectra.errors import ConfigurationError
from euler_spectra.fields import (
    VectorField,
    dealias_23,
    fft_forward,
    integrate_domain,
    leray_project,
    magnitude_squared,
    to_physical,
)
from euler_spectra.grid import Grid


def _finalize(v: VectorField) -> VectorField:
    """Project and dealias a freshly built spectral field."""
    return dealias_23(leray_project(v))


def taylor_green(grid: Grid) -> VectorField:
    """Taylor-Green vortex.

    v = (sin x cos y cos z, -cos x sin y cos z, 0).  Zero helicity,
    mirror-symmetric, and exactly divergence-free; the classical
    stretching benchmark.
    """
    x, y, z = grid.coordinates()
    u1 = np.sin(x) * np.cos(y) * np.cos(z)
    u2 = -np.cos(x) * np.sin(y) * np.cos(z)
    u3 = np.zeros_like(u1)
    return _finalize(fft_forward(VectorField.physical(grid, (u1, u2, u3))))


def abc_flow(grid: Grid, a: float = 1.0, b: float = 1.0,
             c: float = 1.0) -> VectorField:
    """Arnold-Beltrami-Childress flow.

    v = (a sin z + c cos y, b sin x + a cos z, c sin y + b cos x).
    An eigenfunction of curl (curl v = v), hence a steady solution of
    the inviscid equations — ideal for conservation and steadiness
    checks.
    """
    x, y, z = grid.coordinates()
    u1 = a * np.sin(z) + c * np.cos(y)
    u2 = b * np.sin(x) + a * np.cos(z)
    u3 = c * np.sin(y) + b * np.cos(x)
    return _finalize(fft_forward(VectorField.physical(grid, (u1, u2, u3))))


def shear_flow(grid: Grid) -> VectorField:
    """Plane shear v = (sin y, 0, 0): unidirectional, zero middle eigenvalue."""
    _, y, _ = grid.coordinates()
    u1 = np.sin(y)
    u2 = np.zeros_like(u1)
    u3 = np.zeros_like(u1)
    return _finalize(fft_forward(VectorField.physical(grid, (u1, u2, u3))))


def random_solenoidal(grid: Grid, seed: int, peak_k: float = 4.0,
                      slope: float = 2.0,
                      amplitude: float = 1.0) -> VectorField:
    """Random divergence-free field with a bump spectrum.

    White Gaussian noise is shaped by the radial envelope
    ``k**slope * exp(-(k/peak_k)**2)``, projected, restricted to the
    dealiased ball, and rescaled so the kinetic energy equals
    ``amplitude``.

    Raises
    ------
    ConfigurationError
        If ``peak_k`` does not fit inside the dealiased band or the
        amplitude is not positive.
    """
    if not peak_k > 0.0:
        raise ConfigurationError(f"peak_k must be positive, got {peak_k}")
    if peak_k >= grid.dealias_limit:
        raise ConfigurationError(
            f"peak_k={peak_k} does not fit in the dealiased band "
            f"(|k| <= {grid.dealias_limit}) of an n={grid.n} grid")
    if not amplitude > 0.0:
        raise ConfigurationError(
            f"amplitude must be positive, got {amplitude}")

    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((3, grid.n, grid.n, grid.n))
    vhat = fft_forward(VectorField.physical(grid, tuple(noise)))

    kmag = grid.mode_radius()
    with np.errstate(divide="ignore"):
        envelope = np.where(
            kmag > 0.0,
            kmag ** slope * np.exp(-((kmag / peak_k) ** 2)),
            0.0)
    shaped = VectorField.spectral(
        grid, tuple(c * envelope for c in vhat.arrays()))
    shaped = _finalize(shaped)

    energy = 0.5 * integrate_domain(magnitude_squared(to_physical(shaped)))
    if energy <= 0.0:
        raise ConfigurationError(
            "random field degenerated to zero energy; check the spectrum "
            "parameters")
    return shaped * float(np.sqrt(amplitude / energy))


def classify_initial(v: VectorField,
                     tolerance: float | None = None) -> Classification:
    """Classify a velocity field by the sign of the middle eigenvalue.

    Convenience pipeline: deformation tensor -> eigenvalues -> sign
    classification, in one call.
    """
    spectra = eigenvalues_sym3(deformation_tensor(v))
    return classify_admissible(spectra, tolerance)
