"""Uniform collocation grid on the periodic cube [0, L)^3.

A :class:`Grid` owns every wavenumber table the spectral operators need,
so downstream code never rebuilds (or worse, rebuilds inconsistently)
the derivative wavenumbers, projection wavenumbers, or dealiasing mask.

Two distinct wavenumber tables coexist on purpose:

``k_deriv``
    Physical-unit wavenumbers with the Nyquist mode zeroed.  Multiplying
    by ``1j * k_deriv`` differentiates; zeroing the unpaired Nyquist
    mode keeps the discrete derivative skew-adjoint, so quantities like
    the trace of the deformation tensor vanish to rounding.

``k_true``
    The full integer wavenumbers including Nyquist.  The solenoidal
    projection uses these so that it is exactly idempotent on every
    representable mode, Nyquist included.
"""

import math
from dataclasses import dataclass

import numpy as np

from euler_spectra.errors import ConfigurationError

TAU = 2.0 * math.pi


@dataclass(frozen=True)
class Grid:
    """Cubic periodic grid with n collocation points per axis.

    Parameters
    ----------
    n : int
        Points per axis.  Must be even and at least 8; powers of two
        give the fastest transforms.
    length : float, optional
        Box edge length, default ``2*pi``.

    Notes
    -----
    Derived tables are computed once in ``__post_init__`` and attached
    to the (frozen) instance:

    - ``dx``, ``cell_volume``, ``volume``
    - ``freq``: integer mode numbers along one axis, FFT layout
    - ``k_deriv_x/y/z``: broadcastable derivative wavenumbers (Nyquist
      zeroed, physical units)
    - ``k_true_x/y/z``: broadcastable projection wavenumbers
    - ``k_squared``: |k|^2 from the true wavenumbers, shape (n, n, n)
    - ``dealias_mask``: boolean keep-mask for the 2/3-rule ball
    """

    n: int
    length: float = TAU

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)):
            raise ConfigurationError(f"grid size must be an integer, got {self.n!r}")
        if self.n < 8 or self.n % 2 != 0:
            raise ConfigurationError(
                f"grid size must be even and >= 8, got {self.n}")
        if not (self.length > 0.0 and math.isfinite(self.length)):
            raise ConfigurationError(
                f"box length must be positive and finite, got {self.length}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "length", float(self.length))

        n = self.n
        object.__setattr__(self, "dx", self.length / n)
        object.__setattr__(self, "cell_volume", (self.length / n) ** 3)
        object.__setattr__(self, "volume", self.length ** 3)

        # Integer mode numbers in FFT layout: 0, 1, ..., n/2-1, -n/2, ..., -1
        freq = np.fft.fftfreq(n, d=1.0 / n).astype(np.float64)
        object.__setattr__(self, "freq", freq)

        scale = TAU / self.length
        k_deriv = scale * freq
        k_deriv[n // 2] = 0.0  # unpaired Nyquist mode carries no derivative
        k_true = scale * freq

        object.__setattr__(self, "k_deriv_x", k_deriv.reshape(n, 1, 1))
        object.__setattr__(self, "k_deriv_y", k_deriv.reshape(1, n, 1))
        object.__setattr__(self, "k_deriv_z", k_deriv.reshape(1, 1, n))
        object.__setattr__(self, "k_true_x", k_true.reshape(n, 1, 1))
        object.__setattr__(self, "k_true_y", k_true.reshape(1, n, 1))
        object.__setattr__(self, "k_true_z", k_true.reshape(1, 1, n))

        k_squared = (self.k_true_x ** 2 + self.k_true_y ** 2
                     + self.k_true_z ** 2)
        object.__setattr__(self, "k_squared", k_squared)
        k_squared_safe = k_squared.copy()
        k_squared_safe[0, 0, 0] = 1.0
        object.__setattr__(self, "k_squared_safe", k_squared_safe)

        # 2/3-rule: keep modes with 3*|k_j| <= n on every axis.
        keep_1d = 3 * np.abs(freq) <= n
        object.__setattr__(
            self,
            "dealias_mask",
            (keep_1d.reshape(n, 1, 1)
             & keep_1d.reshape(1, n, 1)
             & keep_1d.reshape(1, 1, n)),
        )

    def coordinates(self):
        """Return the physical coordinate arrays (X, Y, Z), ij-indexed.

        Built on demand; generators are the only consumers and keeping
        three dense (n, n, n) arrays cached would waste memory.
        """
        axis = np.arange(self.n, dtype=np.float64) * self.dx
        return np.meshgrid(axis, axis, axis, indexing="ij")

    def mode_radius(self):
        """Integer-wavenumber magnitude sqrt(kx^2+ky^2+kz^2), shape (n, n, n)."""
        fx = self.freq.reshape(self.n, 1, 1)
        fy = self.freq.reshape(1, self.n, 1)
        fz = self.freq.reshape(1, 1, self.n)
        return np.sqrt(fx * fx + fy * fy + fz * fz)

    @property
    def dealias_limit(self) -> int:
        """Largest integer mode magnitude retained per axis by the 2/3 rule."""
        return self.n // 3
