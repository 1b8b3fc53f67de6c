"""Velocity gradient, deformation tensor, and its eigenvalue fields.

The deformation (rate-of-strain) tensor is the symmetric part of the
velocity gradient, ``S_ij = (d_i v_j + d_j v_i) / 2``.  For an
incompressible velocity it is traceless, so its three real eigenvalues
satisfy ``l1 + l2 + l3 = 0`` with the ordering convention
``l1 >= l2 >= l3``.  The middle eigenvalue drives most of the
diagnostics in this package, so the eigensolver below is engineered to
deliver it at close to machine precision even when two eigenvalues
collide.

Eigensolver design
------------------
The bulk of the grid is handled by the closed-form trigonometric
solution of the characteristic cubic (Cardano in trigonometric form).
That formula is backward stable but loses roughly half the significant
digits when splitting a *near-degenerate pair*: the split enters
through ``cos`` terms that agree to O(gap), so the pair is resolved
only to O(sqrt(eps) * scale).  Points whose smallest eigenvalue gap
falls below a relative threshold are therefore recomputed by a
closed-form deflation: the eigenvector of the isolated eigenvalue is
read off from column cross products of ``S - l_iso I``, an orthonormal
basis of its complement is completed, and the remaining 2x2 symmetric
block is solved exactly.  Both routes are non-iterative and avoid any
LAPACK dependency, so library eigensolvers remain available as an
independent cross-check.
"""

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from euler_spectra.errors import ContractViolationError, NumericsError
from euler_spectra.fields import (
    PHYSICAL,
    ScalarField,
    VectorField,
    fft_inverse,
    spectral_derivative,
)
from euler_spectra.grid import Grid

logger = logging.getLogger("euler_spectra.deformation")

# Relative pair-gap threshold below which the deflation path takes over.
# At the crossover the trig route still carries ~eps/GAP_THRESHOLD ~ 2e-12
# relative error, comfortably under the 1e-10 contract.
_GAP_THRESHOLD = 1e-4

_COMPONENT_NAMES = ("s11", "s12", "s13", "s22", "s23", "s33")


@dataclass
class SymTensorField:
    """Symmetric 3x3 tensor field stored as six physical scalar fields."""

    grid: Grid
    s11: ScalarField
    s12: ScalarField
    s13: ScalarField
    s22: ScalarField
    s23: ScalarField
    s33: ScalarField

    def __post_init__(self):
        for name in _COMPONENT_NAMES:
            comp = getattr(self, name)
            if comp.grid != self.grid:
                raise ContractViolationError(
                    f"component {name} lives on a different grid")
            if not comp.is_physical:
                raise ContractViolationError(
                    f"component {name} must be physical")

    @classmethod
    def from_arrays(cls, grid: Grid, arrays) -> "SymTensorField":
        """Build from six ndarrays ordered (s11, s12, s13, s22, s23, s33)."""
        fields = [ScalarField.physical(grid, a) for a in arrays]
        return cls(grid, *fields)

    def component_arrays(self):
        return tuple(getattr(self, name).values for name in _COMPONENT_NAMES)

    def trace_values(self) -> np.ndarray:
        return self.s11.values + self.s22.values + self.s33.values

    def frobenius_squared(self) -> np.ndarray:
        """Pointwise sum of squared entries (off-diagonals counted twice)."""
        s11, s12, s13, s22, s23, s33 = self.component_arrays()
        return (s11 * s11 + s22 * s22 + s33 * s33
                + 2.0 * (s12 * s12 + s13 * s13 + s23 * s23))


@dataclass
class SpectraField:
    """Ordered eigenvalue fields l1 >= l2 >= l3 of a symmetric tensor."""

    grid: Grid
    l1: ScalarField
    l2: ScalarField
    l3: ScalarField

    def lambda1_rms(self) -> float:
        """Root mean square of the largest eigenvalue over the grid."""
        return float(np.sqrt(np.mean(self.l1.values ** 2)))


class AdmissibleClass(str, Enum):
    """Sign class of the middle eigenvalue over the whole grid."""

    APLUS = "APlus"
    AMINUS = "AMinus"
    NEITHER = "Neither"


@dataclass
class Classification:
    """Outcome of the middle-eigenvalue sign test.

    ``tolerance`` is the strictness margin that was applied: the field
    counts as one-signed only if it clears zero by more than this.
    """

    label: AdmissibleClass
    min_lambda2: float
    max_lambda2: float
    tolerance: float


def velocity_gradient(v: VectorField):
    """Physical-space gradient of a spectral velocity field.

    Returns a 3x3 nested tuple ``grad[i][j]`` holding the physical
    ScalarField of ``d v_j / d x_i`` (row index = derivative direction).
    """
    if not v.is_spectral:
        raise ContractViolationError("velocity_gradient needs a spectral field")
    rows = []
    for i in range(3):
        row = tuple(fft_inverse(spectral_derivative(v.components[j], i))
                    for j in range(3))
        rows.append(row)
    return tuple(rows)


def deformation_tensor(source) -> SymTensorField:
    """Symmetric part of the velocity gradient.

    Accepts either a spectral VectorField (preferred: builds the six
    independent components with six inverse transforms) or a 3x3
    gradient tuple as produced by :func:`velocity_gradient`.

    Logs a warning when the pointwise trace is not negligible against
    the tensor magnitude, since downstream eigenvalue identities assume
    a divergence-free velocity.
    """
    if isinstance(source, VectorField):
        v = source
        if not v.is_spectral:
            raise ContractViolationError(
                "deformation_tensor needs a spectral velocity")
        g = v.grid
        v1, v2, v3 = v.arrays()
        kx, ky, kz = g.k_deriv_x, g.k_deriv_y, g.k_deriv_z

        def half_sym(ka, fa, kb, fb):
            return fft_inverse(ScalarField.spectral(
                g, 0.5j * (ka * fb + kb * fa))).values

        s11 = fft_inverse(ScalarField.spectral(g, 1j * kx * v1)).values
        s22 = fft_inverse(ScalarField.spectral(g, 1j * ky * v2)).values
        s33 = fft_inverse(ScalarField.spectral(g, 1j * kz * v3)).values
        s12 = half_sym(kx, v1, ky, v2)
        s13 = half_sym(kx, v1, kz, v3)
        s23 = half_sym(ky, v2, kz, v3)
        tensor = SymTensorField.from_arrays(g, (s11, s12, s13, s22, s23, s33))
    else:
        grad = source
        g = grad[0][0].grid
        s11 = grad[0][0].values
        s22 = grad[1][1].values
        s33 = grad[2][2].values
        s12 = 0.5 * (grad[0][1].values + grad[1][0].values)
        s13 = 0.5 * (grad[0][2].values + grad[2][0].values)
        s23 = 0.5 * (grad[1][2].values + grad[2][1].values)
        tensor = SymTensorField.from_arrays(g, (s11, s12, s13, s22, s23, s33))

    trace_rms = float(np.sqrt(np.mean(tensor.trace_values() ** 2)))
    mag_rms = float(np.sqrt(np.mean(tensor.frobenius_squared())))
    if mag_rms > 0.0 and trace_rms > 1e-10 * mag_rms:
        logger.warning(
            "deformation tensor trace RMS %.3e exceeds 1e-10 of magnitude "
            "%.3e; velocity may not be divergence-free", trace_rms, mag_rms)
    return tensor


def _eigenvalues_trig(s11, s12, s13, s22, s23, s33):
    """Trigonometric closed form for the ordered eigenvalues.

    Returns (l1, l2, l3, spread) with l1 >= l2 >= l3, where spread is
    the deviator scale 2p used for relative gap tests.  Points with a
    zero deviator come out exactly (q, q, q).
    """
    q = (s11 + s22 + s33) / 3.0
    b11 = s11 - q
    b22 = s22 - q
    b33 = s33 - q
    p2 = (b11 * b11 + b22 * b22 + b33 * b33
          + 2.0 * (s12 * s12 + s13 * s13 + s23 * s23)) / 6.0
    p = np.sqrt(p2)
    det = (b11 * (b22 * b33 - s23 * s23)
           - s12 * (s12 * b33 - s23 * s13)
           + s13 * (s12 * s23 - b22 * s13))
    p_safe = np.where(p > 0.0, p, 1.0)
    arg = np.clip(0.5 * det / (p_safe * p_safe * p_safe), -1.0, 1.0)
    theta = np.arccos(arg) / 3.0
    l1 = 2.0 * p * np.cos(theta)
    l3 = 2.0 * p * np.cos(theta + 2.0 * np.pi / 3.0)
    l2 = -(l1 + l3)
    return q + l1, q + l2, q + l3, 2.0 * p


def _refine_near_degenerate(components, lam, idx):
    """Recompute eigenvalues at flat indices idx by closed-form deflation.

    components : six flat arrays (s11, s12, s13, s22, s23, s33)
    lam : (N, 3) eigenvalue table, modified in place at rows idx
    """
    m = idx.size
    if m == 0:
        return
    s11, s12, s13, s22, s23, s33 = (c[idx] for c in components)
    S = np.empty((m, 3, 3), dtype=np.float64)
    S[:, 0, 0] = s11
    S[:, 1, 1] = s22
    S[:, 2, 2] = s33
    S[:, 0, 1] = S[:, 1, 0] = s12
    S[:, 0, 2] = S[:, 2, 0] = s13
    S[:, 1, 2] = S[:, 2, 1] = s23

    sub = lam[idx]
    gap_hi = sub[:, 0] - sub[:, 1]
    gap_lo = sub[:, 1] - sub[:, 2]
    # The isolated eigenvalue sits across the *larger* gap from the pair.
    lam_iso = np.where(gap_hi > gap_lo, sub[:, 0], sub[:, 2])

    M = S - lam_iso[:, None, None] * np.eye(3)
    c0, c1, c2 = M[:, :, 0], M[:, :, 1], M[:, :, 2]
    # For symmetric M of rank 2, any cross product of two independent
    # columns points along the null space, i.e. the isolated eigenvector.
    candidates = np.stack(
        [np.cross(c0, c1), np.cross(c0, c2), np.cross(c1, c2)], axis=1)
    norms = np.linalg.norm(candidates, axis=2)
    rows = np.arange(m)
    v = candidates[rows, np.argmax(norms, axis=1), :]
    vnorm = np.linalg.norm(v, axis=1)
    usable = vnorm > 0.0
    v[usable] /= vnorm[usable][:, None]
    # Near-triple degeneracy leaves no usable direction; any unit vector
    # gives the right answer to O(spread) there.
    v[~usable] = (1.0, 0.0, 0.0)

    # Complete {v} to an orthonormal basis: start from the coordinate
    # axis least aligned with v, so the projection never degenerates.
    j = np.argmin(np.abs(v), axis=1)
    e = np.zeros((m, 3))
    e[rows, j] = 1.0
    u = e - np.sum(e * v, axis=1)[:, None] * v
    u /= np.linalg.norm(u, axis=1)[:, None]
    w = np.cross(v, u)

    Su = np.einsum("pij,pj->pi", S, u)
    Sw = np.einsum("pij,pj->pi", S, w)
    b11 = np.sum(u * Su, axis=1)
    b12 = np.sum(u * Sw, axis=1)
    b22 = np.sum(w * Sw, axis=1)
    mid = 0.5 * (b11 + b22)
    disc = np.hypot(0.5 * (b11 - b22), b12)

    out = np.stack([lam_iso, mid + disc, mid - disc], axis=1)
    out.sort(axis=1)
    lam[idx] = out[:, ::-1]


def eigenvalues_sym3(tensor: SymTensorField) -> SpectraField:
    """Ordered eigenvalue fields of a symmetric tensor field.

    Dual-route evaluation: trigonometric closed form everywhere, with a
    closed-form deflation pass on points whose smallest eigenvalue gap
    is below ``1e-4`` of the local spread (see module docstring).

    Raises
    ------
    NumericsError
        If any tensor entry is non-finite; the message names the first
        offending grid index.
    """
    comps = tensor.component_arrays()
    for name, arr in zip(_COMPONENT_NAMES, comps):
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise NumericsError(
                f"non-finite deformation tensor component {name} at grid "
                f"index {tuple(int(b) for b in bad)}")

    l1, l2, l3, spread = _eigenvalues_trig(*comps)

    gap = np.minimum(l1 - l2, l2 - l3)
    needs_refine = (gap < _GAP_THRESHOLD * spread) & (spread > 0.0)
    if np.any(needs_refine):
        flat = tuple(c.ravel() for c in comps)
        lam = np.stack([l1.ravel(), l2.ravel(), l3.ravel()], axis=1)
        _refine_near_degenerate(flat, lam, np.nonzero(needs_refine.ravel())[0])
        shape = l1.shape
        l1 = lam[:, 0].reshape(shape)
        l2 = lam[:, 1].reshape(shape)
        l3 = lam[:, 2].reshape(shape)

    g = tensor.grid
    return SpectraField(g,
                        ScalarField.physical(g, l1),
                        ScalarField.physical(g, l2),
                        ScalarField.physical(g, l3))


def lambda2_split(spectra: SpectraField):
    """Split the middle eigenvalue into nonnegative and nonpositive parts.

    Returns (plus, minus) physical ScalarFields with
    ``plus = max(l2, 0)`` and ``minus = min(l2, 0)``, so that
    ``plus + minus == l2`` pointwise.
    """
    l2 = spectra.l2.values
    g = spectra.grid
    return (ScalarField.physical(g, np.maximum(l2, 0.0)),
            ScalarField.physical(g, np.minimum(l2, 0.0)))


def classify_admissible(spectra: SpectraField,
                        tolerance: float | None = None) -> Classification:
    """Classify the grid by the sign of the middle eigenvalue.

    ``APlus`` requires ``min l2 > tolerance`` everywhere, ``AMinus``
    requires ``max l2 < -tolerance``; anything else is ``Neither``.
    The default tolerance is ``1e-10`` of the RMS of the largest
    eigenvalue, so zero fields and rounding noise classify as Neither
    rather than flapping between classes.
    """
    if tolerance is None:
        tolerance = 1e-10 * spectra.lambda1_rms()
    tolerance = float(tolerance)
    if tolerance < 0.0:
        raise ContractViolationError("classification tolerance must be >= 0")
    min_l2 = float(np.min(spectra.l2.values))
    max_l2 = float(np.max(spectra.l2.values))
    if min_l2 > tolerance:
        label = AdmissibleClass.APLUS
    elif max_l2 < -tolerance:
        label = AdmissibleClass.AMINUS
    else:
        label = AdmissibleClass.NEITHER
    return Classification(label, min_l2, max_l2, tolerance)


def epsilon_ratio(spectra: SpectraField, classification: Classification,
                  floor: float | None = None):
    """Pointwise ratio |l2| / l where l is the dominant eigenvalue.

    For an ``APlus`` field the denominator is ``l1``, for ``AMinus`` it
    is ``-l3``; in both cases the denominator is positive away from
    zeros of the tensor.  Points with denominator at or below ``floor``
    (default ``1e-12`` of the RMS of l1) are excluded: their ratio is
    set to NaN and they are tallied in the returned count.

    Returns
    -------
    (ScalarField, int)
        The ratio field (NaN at excluded points) and the number of
        excluded points.
    """
    if classification.label == AdmissibleClass.NEITHER:
        raise ContractViolationError(
            "epsilon ratio is only defined for one-signed middle eigenvalue")
    if floor is None:
        floor = 1e-12 * spectra.lambda1_rms()
    floor = float(floor)
    if classification.label == AdmissibleClass.APLUS:
        denom = spectra.l1.values
    else:
        denom = -spectra.l3.values
    defined = denom > floor
    ratio = np.full(denom.shape, np.nan, dtype=np.float64)
    np.divide(np.abs(spectra.l2.values), denom, out=ratio, where=defined)
    excluded = int(np.count_nonzero(~defined))
    return ScalarField.physical(spectra.grid, ratio), excluded


def first_zero_touching(history, classification: Classification,
                        tolerance: float | None = None):
    """First sample time at which the sign condition fails.

    Parameters
    ----------
    history : sequence of (t, min_l2, max_l2)
        Grid extrema of the middle eigenvalue along a run, in time order.
    classification : Classification
        Class the run started in; must not be Neither.
    tolerance : float, optional
        Defaults to the classification's own tolerance.

    Returns
    -------
    float or None
        The earliest sample time whose extrema show the middle
        eigenvalue crossing zero the wrong way by more than the
        tolerance (below -tolerance for the positive class, above
        +tolerance for the negative one), or None if the sign
        condition survives the whole history.
    """
    if classification.label == AdmissibleClass.NEITHER:
        raise ContractViolationError(
            "zero-touching time is only defined for one-signed classes")
    history = list(history)
    if not history:
        raise ContractViolationError("history must contain at least one sample")
    if tolerance is None:
        tolerance = classification.tolerance
    for t, min_l2, max_l2 in history:
        if classification.label == AdmissibleClass.APLUS:
            if min_l2 < -tolerance:
                return float(t)
        else:
            if max_l2 > tolerance:
                return float(t)
    return None
