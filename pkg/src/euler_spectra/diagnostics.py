"""Per-step diagnostics: conserved quantities, eigenvalue moments, CSV.

The record layout is part of the package's external contract: the CSV
header below is stable and parsers may rely on it.  Each record row is
written with ``repr(float(x))`` so values round-trip exactly through
text, and the file is flushed after every row so a killed run leaves a
usable series behind.

Integral identities
-------------------
Three exact identities of the semidiscrete system are monitored, all
consequences of incompressibility and integration by parts:

- enstrophy vs. second eigenvalue moment:  Z = 2 Q
- vortex stretching vs. cubic trace:       W = -(4/3) C3
- cubic trace vs. eigenvalue product:      C3 = 3 P

Each is tracked as a normalized residual whose denominator is floored
by a small multiple of the natural scale sqrt(Q) * Z, so symmetric
initial data (where both sides vanish) does not report junk ratios.
"""

import math
from dataclasses import dataclass, fields as dataclass_fields

import numpy as np

from euler_spectra.deformation import (
    AdmissibleClass,
    Classification,
    SpectraField,
    SymTensorField,
    classify_admissible,
    deformation_tensor,
    eigenvalues_sym3,
    epsilon_ratio,
)
from euler_spectra.envelopes import EnvelopeAccumulator, envelope_rates
from euler_spectra.errors import ContractViolationError
from euler_spectra.fields import (
    ScalarField,
    VectorField,
    curl,
    fft_inverse,
    integrate_domain,
    magnitude_squared,
    pointwise_dot,
    to_physical,
    to_spectral,
)
from euler_spectra.reductions import pairwise_sum


def energy(v: VectorField) -> float:
    """Kinetic energy 0.5 * integral |v|^2 of a velocity field."""
    return 0.5 * integrate_domain(magnitude_squared(to_physical(v)))


def helicity(v: VectorField) -> float:
    """Helicity integral v . curl v of a velocity field."""
    vh = to_spectral(v)
    return integrate_domain(
        pointwise_dot(to_physical(vh), fft_inverse(curl(vh))))


def enstrophy(v: VectorField) -> float:
    """Enstrophy integral |curl v|^2 of a velocity field."""
    omega = fft_inverse(curl(to_spectral(v)))
    return integrate_domain(magnitude_squared(omega))


def gradient_norm_squared_pointwise(grad) -> ScalarField:
    """Pointwise |grad v|^2 = sum_ij (d_i v_j)^2 from a gradient tuple."""
    g = grad[0][0].grid
    total = np.zeros((g.n,) * 3, dtype=np.float64)
    for i in range(3):
        for j in range(3):
            total += grad[i][j].values ** 2
    return ScalarField.physical(g, total)


def spectra_moments(spectra: SpectraField):
    """Quadratic and product moments (Q, P) of the eigenvalue fields.

    Q = integral (l1^2 + l2^2 + l3^2),  P = integral (l1 l2 l3).
    """
    l1 = spectra.l1.values
    l2 = spectra.l2.values
    l3 = spectra.l3.values
    vol = spectra.grid.cell_volume
    q = vol * pairwise_sum(l1 * l1 + l2 * l2 + l3 * l3)
    p = vol * pairwise_sum(l1 * l2 * l3)
    return q, p


def stretching_integral(tensor: SymTensorField, omega: VectorField) -> float:
    """Vortex-stretching integral W = integral omega . S omega."""
    if not omega.is_physical:
        raise ContractViolationError("stretching_integral needs physical omega")
    s11, s12, s13, s22, s23, s33 = tensor.component_arrays()
    w1, w2, w3 = omega.arrays()
    quad = (s11 * w1 * w1 + s22 * w2 * w2 + s33 * w3 * w3
            + 2.0 * (s12 * w1 * w2 + s13 * w1 * w3 + s23 * w2 * w3))
    return tensor.grid.cell_volume * pairwise_sum(quad)


def cubic_trace_integral(tensor: SymTensorField) -> float:
    """Integral of tr(S^3), evaluated from components (not eigenvalues).

    Using the componentwise expansion keeps this quantity independent
    of the eigensolver, so comparing it against 3 P cross-checks the
    entire eigenvalue pipeline.
    """
    s11, s12, s13, s22, s23, s33 = tensor.component_arrays()
    cubic = (s11 ** 3 + s22 ** 3 + s33 ** 3
             + 3.0 * (s12 * s12 * (s11 + s22)
                      + s13 * s13 * (s11 + s33)
                      + s23 * s23 * (s22 + s33))
             + 6.0 * s12 * s13 * s23)
    return tensor.grid.cell_volume * pairwise_sum(cubic)


def sup_vorticity(omega: VectorField) -> float:
    """Maximum pointwise vorticity magnitude."""
    return float(np.sqrt(np.max(magnitude_squared(to_physical(omega)).values)))


def resolution_tail_fraction(v: VectorField) -> float:
    """Fraction of enstrophy carried by the outer third of retained modes.

    A well-resolved field keeps this small; values approaching one mean
    the retained band is saturated and the run is underresolved.  Uses
    the infinity-norm shell |k|_inf > (2/3) * (n/3) as the tail.
    """
    vh = to_spectral(v)
    g = vh.grid
    omega_hat = curl(vh)
    power = sum(np.abs(c) ** 2 for c in omega_hat.arrays())
    keep = g.dealias_mask
    absf = np.abs(g.freq)
    kinf = np.maximum(np.maximum(absf.reshape(g.n, 1, 1),
                                 absf.reshape(1, g.n, 1)),
                      absf.reshape(1, 1, g.n))
    tail = keep & (kinf > (2.0 / 3.0) * g.dealias_limit)
    total = pairwise_sum(power[keep])
    if total <= 0.0:
        return 0.0
    return pairwise_sum(power[tail]) / total


_CSV_FIELDS = ("t", "E", "H", "Z", "Q", "P", "W", "C3",
               "sup_l2p", "inf_l2p", "sup_l2m_abs", "inf_l2m_abs",
               "min_l2", "max_l2", "inf_eps", "bkm_sup_vort")

_ENVELOPE_FIELDS = ("env_lower", "env_upper", "bkm_integral",
                    "class_env_lower", "class_env_upper")


@dataclass
class DiagnosticsRecord:
    """One diagnostics sample; attribute order matches the CSV header."""

    t: float
    E: float
    H: float
    Z: float
    Q: float
    P: float
    W: float
    C3: float
    sup_l2p: float
    inf_l2p: float
    sup_l2m_abs: float
    inf_l2m_abs: float
    min_l2: float
    max_l2: float
    inf_eps: float
    bkm_sup_vort: float

    @staticmethod
    def field_names():
        return _CSV_FIELDS

    def as_tuple(self):
        return tuple(getattr(self, name) for name in _CSV_FIELDS)


assert tuple(f.name for f in dataclass_fields(DiagnosticsRecord)) == _CSV_FIELDS


def compute_record(t: float, v: VectorField,
                   classification: Classification | None = None,
                   eps_floor: float | None = None,
                   class_valid: bool = True) -> DiagnosticsRecord:
    """Evaluate the full diagnostics pipeline for one velocity field.

    The epsilon-ratio infimum is only defined while the run sits in a
    one-signed class; pass the run's classification (and whether the
    sign condition still holds) to populate it, otherwise it is NaN.
    """
    vh = to_spectral(v)
    v_phys = fft_inverse(vh)
    omega_phys = fft_inverse(curl(vh))
    tensor = deformation_tensor(vh)
    spectra = eigenvalues_sym3(tensor)

    e = 0.5 * integrate_domain(magnitude_squared(v_phys))
    h = integrate_domain(pointwise_dot(v_phys, omega_phys))
    z = integrate_domain(magnitude_squared(omega_phys))
    q, p = spectra_moments(spectra)
    w = stretching_integral(tensor, omega_phys)
    c3 = cubic_trace_integral(tensor)

    min_l2 = float(np.min(spectra.l2.values))
    max_l2 = float(np.max(spectra.l2.values))
    sup_l2p = max(max_l2, 0.0)
    inf_l2p = max(min_l2, 0.0)
    sup_l2m_abs = max(-min_l2, 0.0)
    inf_l2m_abs = max(-max_l2, 0.0)

    inf_eps = math.nan
    if (classification is not None and class_valid
            and classification.label != AdmissibleClass.NEITHER):
        ratio, excluded = epsilon_ratio(spectra, classification, eps_floor)
        if excluded < ratio.values.size:
            inf_eps = float(np.nanmin(ratio.values))

    bkm = float(np.sqrt(np.max(magnitude_squared(omega_phys).values)))

    return DiagnosticsRecord(
        t=float(t), E=e, H=h, Z=z, Q=q, P=p, W=w, C3=c3,
        sup_l2p=sup_l2p, inf_l2p=inf_l2p,
        sup_l2m_abs=sup_l2m_abs, inf_l2m_abs=inf_l2m_abs,
        min_l2=min_l2, max_l2=max_l2,
        inf_eps=inf_eps, bkm_sup_vort=bkm)


def identity_residuals(record: DiagnosticsRecord) -> dict:
    """Normalized residuals of the three exact integral identities.

    Denominators are floored at 1e-6 of the natural stretching scale
    sqrt(Q) * Z, so that residuals stay meaningful when symmetry makes
    both sides of an identity vanish (e.g. mirror-symmetric data at
    t = 0, where W and C3 are zero to rounding).
    """
    z, q, p, w, c3 = record.Z, record.Q, record.P, record.W, record.C3
    moment = abs(z - 2.0 * q) / max(abs(z), 2.0 * abs(q), 1e-300)
    # Natural magnitude of W and C3: RMS eigenvalue times enstrophy.
    scale = math.sqrt(max(q, 0.0)) * z
    floor = max(1e-6 * scale, 1e-300)
    stretching = abs(w + (4.0 / 3.0) * c3) / max(
        abs(w), (4.0 / 3.0) * abs(c3), floor)
    cubic = abs(c3 - 3.0 * p) / max(abs(c3), 3.0 * abs(p), floor)
    return {
        "enstrophy_moment": moment,
        "stretching_cubic": stretching,
        "cubic_product": cubic,
    }


def _format_row(values) -> str:
    return ",".join(repr(float(x)) for x in values)


class DiagnosticsCollector:
    """Run observer that records diagnostics and streams them to CSV.

    Parameters
    ----------
    every : int
        Record cadence in steps (>= 1); step 0 is always recorded.
    csv_path : str or Path, optional
        Destination for the incremental CSV.  The file carries the
        sixteen record columns plus five envelope columns.
    class_tolerance : float, optional
        Tolerance handed to the sign classification of the first
        sample; default lets the classifier pick its own.
    eps_floor : float, optional
        Denominator floor for the epsilon ratio.

    Notes
    -----
    The envelope columns integrate the middle-eigenvalue extrema with
    the trapezoid rule as records arrive, so the collector's running
    values agree bit for bit with a batch recomputation that uses the
    same left-to-right accumulation (see euler_spectra.envelopes).
    """

    def __init__(self, every: int = 1, csv_path=None,
                 class_tolerance: float | None = None,
                 eps_floor: float | None = None):
        if every < 1:
            raise ContractViolationError(f"cadence must be >= 1, got {every}")
        self.every = int(every)
        self.csv_path = csv_path
        self.class_tolerance = class_tolerance
        self.eps_floor = eps_floor

        self.records: list[DiagnosticsRecord] = []
        self.classification: Classification | None = None
        self.zero_touch_time: float | None = None
        self.max_residuals = {"enstrophy_moment": 0.0,
                              "stretching_cubic": 0.0,
                              "cubic_product": 0.0}
        self.tail_fraction_initial: float | None = None
        self.tail_fraction_final: float | None = None

        self._fh = None
        self._accumulator = EnvelopeAccumulator()
        self.envelope_rows: list[tuple] = []

    # -- classification bookkeeping -------------------------------------

    def _class_active(self) -> bool:
        return (self.classification is not None
                and self.classification.label != AdmissibleClass.NEITHER
                and self.zero_touch_time is None)

    def _update_zero_touch(self, record: DiagnosticsRecord):
        if not self._class_active():
            return
        label = self.classification.label
        tol = self.classification.tolerance
        if label == AdmissibleClass.APLUS and record.min_l2 < -tol:
            self.zero_touch_time = record.t
        elif label == AdmissibleClass.AMINUS and record.max_l2 > tol:
            self.zero_touch_time = record.t

    # -- envelope accumulation ------------------------------------------

    def _advance_envelopes(self, record: DiagnosticsRecord):
        label = self.classification.label if self.classification else None
        rates = envelope_rates(record, label, self._class_active())
        row = self._accumulator.push(record, rates)
        self.envelope_rows.append(row)
        return row

    # -- observer entry point -------------------------------------------

    def __call__(self, state):
        if state.step_index % self.every != 0:
            return
        first = not self.records
        if first:
            spectra = eigenvalues_sym3(deformation_tensor(state.v))
            self.classification = classify_admissible(
                spectra, self.class_tolerance)
            self.tail_fraction_initial = resolution_tail_fraction(state.v)

        record = compute_record(state.t, state.v,
                                classification=self.classification,
                                eps_floor=self.eps_floor,
                                class_valid=self._class_active())
        self._update_zero_touch(record)
        if (self.zero_touch_time is not None
                and self.zero_touch_time == record.t):
            # The sample that broke the sign condition: its epsilon is
            # already meaningless.
            record.inf_eps = math.nan
        self.records.append(record)

        for key, value in identity_residuals(record).items():
            if value > self.max_residuals[key]:
                self.max_residuals[key] = value
        self.tail_fraction_final = resolution_tail_fraction(state.v)

        envelope_row = self._advance_envelopes(record)
        self._write_row(record, envelope_row)

    # -- CSV ---------------------------------------------------------------

    def _write_row(self, record, envelope_row):
        if self.csv_path is None:
            return
        if self._fh is None:
            self._fh = open(self.csv_path, "w", newline="")
            self._fh.write(",".join(_CSV_FIELDS + _ENVELOPE_FIELDS) + "\n")
        self._fh.write(_format_row(record.as_tuple() + envelope_row) + "\n")
        self._fh.flush()

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
        return False

    # -- summary -------------------------------------------------------

    def summary(self) -> dict:
        """Aggregate verdicts for the run so far (see cli for the schema)."""
        if not self.records:
            raise ContractViolationError("no records collected yet")
        first, last = self.records[0], self.records[-1]
        e0, h0 = first.E, first.H
        e_scale = max(abs(e0), 1e-300)
        max_e_drift = max(abs(r.E - e0) for r in self.records) / e_scale
        max_h_drift = max(abs(r.H - h0) for r in self.records)
        return {
            "class": self.classification.label.value,
            "class_tolerance": self.classification.tolerance,
            "lambda2_initial": {"min": first.min_l2, "max": first.max_l2},
            "first_zero_touching": self.zero_touch_time,
            "energy": {"initial": e0, "final": last.E,
                       "max_rel_drift": max_e_drift},
            "helicity": {"initial": h0, "final": last.H,
                         "max_abs_drift": max_h_drift},
            "enstrophy": {"initial": first.Z, "final": last.Z},
            "identity_residuals": dict(self.max_residuals),
            "resolution_health": {
                "tail_enstrophy_fraction_initial": self.tail_fraction_initial,
                "tail_enstrophy_fraction_final": self.tail_fraction_final,
            },
        }
