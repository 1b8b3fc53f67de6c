"""A priori growth envelopes and balance-law residuals for run series.

Everything here consumes sequences of diagnostics records (or raw
velocity snapshots) and produces the derived series used to check the
solver against exact analysis:

- two-sided exponential envelopes for the vorticity L2 norm driven by
  the grid extrema of the middle deformation eigenvalue, with tighter
  one-sided variants while the run stays in a one-signed class;
- an exponential upper bound driven by the positive part alone;
- the balance residual dQ/dt + 4 P of the quadratic eigenvalue moment;
- a decay bound for the middle-to-dominant eigenvalue ratio;
- the pointwise residual of the vorticity transport equation.

Time integrals use the trapezoid rule through a single accumulator
class so that envelopes computed on the fly during a run and envelopes
recomputed afterwards from the same records agree bit for bit.
"""

import math
from dataclasses import dataclass

import numpy as np

from euler_spectra.deformation import (
    AdmissibleClass,
    Classification,
    first_zero_touching,
)
from euler_spectra.errors import ContractViolationError
from euler_spectra.fields import (
    curl,
    fft_inverse,
    spectral_derivative,
    to_spectral,
)


def derivative_4th(values, spacing: float, axis: int = 0) -> np.ndarray:
    """Fourth-order finite-difference time derivative of a sampled series.

    Centered five-point stencil in the interior, one-sided five-point
    stencils at the two samples on each end.  Needs at least five
    samples along the chosen axis.
    """
    y = np.asarray(values, dtype=np.float64)
    if y.shape[axis] < 5:
        raise ContractViolationError(
            f"need >= 5 samples for a 4th-order derivative, got {y.shape[axis]}")
    if not spacing > 0.0:
        raise ContractViolationError(f"spacing must be positive, got {spacing}")
    y = np.moveaxis(y, axis, 0)
    d = np.empty_like(y)
    w = 1.0 / (12.0 * spacing)
    d[2:-2] = (y[:-4] - 8.0 * y[1:-3] + 8.0 * y[3:-1] - y[4:]) * w
    d[0] = (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2]
            + 16.0 * y[3] - 3.0 * y[4]) * w
    d[1] = (-3.0 * y[0] - 10.0 * y[1] + 18.0 * y[2]
            - 6.0 * y[3] + y[4]) * w
    d[-2] = (3.0 * y[-1] + 10.0 * y[-2] - 18.0 * y[-3]
             + 6.0 * y[-4] - y[-5]) * w
    d[-1] = (25.0 * y[-1] - 48.0 * y[-2] + 36.0 * y[-3]
             - 16.0 * y[-4] + 3.0 * y[-5]) * w
    return np.moveaxis(d, 0, axis)


def uniform_spacing(times) -> float:
    """Common spacing of a uniformly sampled time vector.

    Raises if there are fewer than two samples or the spacing wobbles
    by more than one part in 1e9.
    """
    t = np.asarray(times, dtype=np.float64)
    if t.size < 2:
        raise ContractViolationError("need at least two samples")
    steps = np.diff(t)
    h = float(steps[0])
    if not h > 0.0:
        raise ContractViolationError("times must be strictly increasing")
    if np.max(np.abs(steps - h)) > 1e-9 * h:
        raise ContractViolationError("time samples are not uniformly spaced")
    return h


def envelope_rates(record, label, class_active: bool):
    """Instantaneous envelope exponents for one diagnostics record.

    Returns (lower, upper, positive-part, class_lower, class_upper);
    the last two are NaN unless ``class_active``.  Shared by the
    streaming collector and the batch recomputation below — keep it
    that way, envelope reproducibility depends on it.
    """
    lower = 0.5 * record.inf_l2p - record.sup_l2m_abs
    upper = record.sup_l2p - 0.5 * record.inf_l2m_abs
    positive = record.sup_l2p
    class_lower = math.nan
    class_upper = math.nan
    if class_active:
        if label == AdmissibleClass.APLUS:
            class_lower = 0.5 * record.inf_l2p
            class_upper = record.sup_l2p
        elif label == AdmissibleClass.AMINUS:
            class_lower = -record.sup_l2m_abs
            class_upper = -0.5 * record.inf_l2m_abs
    return (lower, upper, positive, class_lower, class_upper)


class EnvelopeAccumulator:
    """Trapezoid-rule integrator shared by streaming and batch paths.

    push() consumes records in time order together with their rates and
    returns the envelope row (lower, upper, positive-part integral,
    class_lower, class_upper) for that instant.  A NaN rate poisons its
    integral from that sample onward, which is exactly the intended
    semantics for class envelopes after the sign condition fails.
    """

    def __init__(self):
        self._prev_t = None
        self._prev_rates = None
        self._sqrt_z0 = None
        self._integrals = None

    def push(self, record, rates):
        if self._prev_t is None:
            self._sqrt_z0 = math.sqrt(max(record.Z, 0.0))
            self._integrals = [0.0, 0.0, 0.0, 0.0, 0.0]
        else:
            h = record.t - self._prev_t
            for i in range(5):
                r0, r1 = self._prev_rates[i], rates[i]
                if math.isnan(r0) or math.isnan(r1):
                    self._integrals[i] = math.nan
                else:
                    self._integrals[i] += 0.5 * h * (r0 + r1)
        self._prev_t = record.t
        self._prev_rates = rates

        s0 = self._sqrt_z0

        def grow(i):
            # math.exp raises on overflow; a diverging run should
            # saturate the envelope to inf instead of crashing here.
            arg = self._integrals[i]
            if arg > 709.0:
                return math.inf if s0 > 0.0 else 0.0
            return s0 * math.exp(arg)
        return (grow(0), grow(1), self._integrals[2], grow(3), grow(4))


@dataclass
class EnvelopeSeries:
    """Envelope curves sampled at record times.

    ``lower``/``upper`` bound sqrt(Z) from both sides for any run;
    ``class_lower``/``class_upper`` are the sharper one-signed-class
    versions, NaN outside a one-signed class or after the first
    zero-touching time.  ``positive_integral`` is the running time
    integral of the positive-part supremum, the exponent of the
    one-sided upper bound.
    """

    times: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    positive_integral: np.ndarray
    class_lower: np.ndarray
    class_upper: np.ndarray


def growth_envelopes(records, classification: Classification | None = None
                     ) -> EnvelopeSeries:
    """Recompute all envelope curves from a list of diagnostics records.

    Matches the columns a DiagnosticsCollector writes, bit for bit,
    when given the same records and classification.
    """
    records = list(records)
    if not records:
        raise ContractViolationError("no records to build envelopes from")

    label = None
    zero_t = None
    if (classification is not None
            and classification.label != AdmissibleClass.NEITHER):
        label = classification.label
        zero_t = first_zero_touching(
            [(r.t, r.min_l2, r.max_l2) for r in records], classification)

    acc = EnvelopeAccumulator()
    rows = []
    for r in records:
        active = label is not None and (zero_t is None or r.t < zero_t)
        rows.append(acc.push(r, envelope_rates(r, label, active)))

    cols = [np.array([row[i] for row in rows]) for i in range(5)]
    times = np.array([r.t for r in records])
    return EnvelopeSeries(times, cols[0], cols[1], cols[2], cols[3], cols[4])


def quadrature_slack(records) -> np.ndarray:
    """Running estimate of the trapezoid error in the envelope exponents.

    Composite-trapezoid error on each interval is h^3 |r''| / 12; the
    second derivative is estimated from second differences of the
    envelope rates (worst of lower/upper).  Returned per sample as a
    relative slack to widen containment tests with.
    """
    records = list(records)
    times = np.array([r.t for r in records])
    if times.size < 3:
        return np.zeros(times.size)
    h = uniform_spacing(times)
    rates = np.array([[0.5 * r.inf_l2p - r.sup_l2m_abs,
                       r.sup_l2p - 0.5 * r.inf_l2m_abs] for r in records])
    dd = np.abs(np.diff(rates, n=2, axis=0)).max(axis=1)
    slack = np.zeros(times.size)
    slack[2:] = (h / 12.0) * np.cumsum(dd)
    slack[1] = slack[2]
    return slack


def containment_check(records, envelopes: EnvelopeSeries) -> dict:
    """Measure how far sqrt(Z) strays outside its envelope band.

    Returns the worst relative violations (positive numbers mean the
    bound was broken; zero or negative mean it held with margin).
    Callers pick their own tolerance, typically a small base plus the
    quadrature slack.
    """
    records = list(records)
    sqrt_z = np.sqrt(np.array([max(r.Z, 0.0) for r in records]))
    den = np.maximum(sqrt_z, 1e-300)
    lower_violation = float(np.max((envelopes.lower - sqrt_z) / den))
    upper_violation = float(np.max((sqrt_z - envelopes.upper) / den))
    return {
        "max_lower_violation": lower_violation,
        "max_upper_violation": upper_violation,
    }


def lambda2_plus_exponential_bound(records, tolerance: float = 1e-6) -> dict:
    """Check sqrt(Z(t)) <= sqrt(Z0) * exp(integral of sup l2+).

    Returns the largest ratio of the two sides and whether it stays
    below 1 + tolerance at every sample.
    """
    records = list(records)
    if not records:
        raise ContractViolationError("no records")
    env = growth_envelopes(records)
    sqrt_z0 = math.sqrt(max(records[0].Z, 0.0))
    bound = sqrt_z0 * np.exp(env.positive_integral)
    sqrt_z = np.sqrt(np.array([max(r.Z, 0.0) for r in records]))
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(bound > 0.0, sqrt_z / bound,
                         np.where(sqrt_z == 0.0, 0.0, np.inf))
    max_ratio = float(np.max(ratio))
    return {"max_ratio": max_ratio,
            "satisfied": bool(max_ratio <= 1.0 + tolerance)}


def moment_balance_residual(records):
    """Residual of the exact balance dQ/dt = -4 P along a record series.

    The derivative of the quadratic eigenvalue moment is taken with the
    fourth-order stencil, so on smooth data the residual shrinks like
    the fourth power of the record spacing.

    Returns
    -------
    (ndarray, ndarray)
        Raw residual dQ/dt + 4P per sample, and the same normalized by
        the series scale max(max |dQ/dt|, max |4P|, floor).  The floor
        is a small multiple of the natural magnitude sqrt(Q) * Z so
        that a series where both sides vanish identically (a steady
        flow) reports a near-zero normalized residual instead of 0/0.
    """
    records = list(records)
    times = np.array([r.t for r in records])
    h = uniform_spacing(times)
    q = np.array([r.Q for r in records])
    p = np.array([r.P for r in records])
    z = np.array([r.Z for r in records])
    dq = derivative_4th(q, h)
    residual = dq + 4.0 * p
    scale = max(float(np.max(np.abs(dq))),
                float(np.max(np.abs(4.0 * p))),
                1e-6 * float(np.max(np.sqrt(np.maximum(q, 0.0)) * z)),
                1e-300)
    return residual, residual / scale


@dataclass
class EpsilonDecayBound:
    """Outcome of the eigenvalue-ratio decay check.

    ``lhs`` is t times the squared running infimum of the ratio; the
    bound says it may never exceed the constant ``rhs``.  Inapplicable
    runs (wrong class, nonpositive helicity for the decaying class, or
    no valid ratio samples) carry ``applicable = False`` and a reason.
    """

    applicable: bool
    reason: str | None
    times: np.ndarray
    lhs: np.ndarray
    rhs: float
    satisfied_series: np.ndarray
    satisfied: bool

    @staticmethod
    def inapplicable(reason: str) -> "EpsilonDecayBound":
        empty = np.array([])
        return EpsilonDecayBound(False, reason, empty, empty, math.nan,
                                 np.array([], dtype=bool), True)


def epsilon_decay_bound(records, classification: Classification,
                        volume: float) -> EpsilonDecayBound:
    """Evaluate the ratio-decay bound for a one-signed-class run.

    For the positive class the constant is
    ``sqrt(27) * sqrt(volume) / (sqrt(2) * sqrt(Z0))``; for the
    negative class it is
    ``sqrt(27) * sqrt(volume) * (sqrt(E0)/H0 - 1/(sqrt(2)*sqrt(Z0)))``,
    which requires positive initial helicity.  Samples after the first
    zero-touching time (where the ratio is NaN) do not advance the
    running infimum.
    """
    records = list(records)
    if not records:
        raise ContractViolationError("no records")
    label = classification.label
    if label == AdmissibleClass.NEITHER:
        return EpsilonDecayBound.inapplicable("class is Neither")

    first = records[0]
    z0, e0, h0 = first.Z, first.E, first.H
    if z0 <= 0.0:
        return EpsilonDecayBound.inapplicable("initial enstrophy is zero")
    if label == AdmissibleClass.APLUS:
        rhs = math.sqrt(27.0) * math.sqrt(volume) / (
            math.sqrt(2.0) * math.sqrt(z0))
    else:
        if h0 <= 0.0:
            return EpsilonDecayBound.inapplicable(
                "decaying-class bound needs positive initial helicity")
        rhs = math.sqrt(27.0) * math.sqrt(volume) * (
            math.sqrt(e0) / h0 - 1.0 / (math.sqrt(2.0) * math.sqrt(z0)))

    times = np.array([r.t for r in records])
    running = math.inf
    lhs = np.empty(times.size)
    for i, r in enumerate(records):
        if not math.isnan(r.inf_eps):
            running = min(running, r.inf_eps)
        lhs[i] = times[i] * running * running if math.isfinite(running) \
            else math.nan
    if not np.any(np.isfinite(lhs)):
        return EpsilonDecayBound.inapplicable("no valid ratio samples")

    with np.errstate(invalid="ignore"):
        satisfied_series = ~(lhs > rhs)  # NaN counts as not violated
    return EpsilonDecayBound(True, None, times, lhs, rhs,
                             satisfied_series, bool(satisfied_series.all()))


def vorticity_transport_residual(times, velocities):
    """Pointwise residual of the vorticity transport equation.

    Given uniformly spaced velocity snapshots (any representation),
    computes  d(omega)/dt + (v . grad) omega - (omega . grad) v  with a
    fourth-order time stencil and spectral space derivatives.

    Returns
    -------
    (ndarray, ndarray)
        Max-norm of the residual per sample, raw and normalized by the
        largest max-norm among the equation's three terms at that
        sample (time derivative, advection, stretching).
    """
    times = np.asarray(times, dtype=np.float64)
    velocities = list(velocities)
    if times.size != len(velocities):
        raise ContractViolationError("times and velocities disagree in length")
    h = uniform_spacing(times)
    if times.size < 5:
        raise ContractViolationError(
            f"need >= 5 snapshots for the transport residual, got {times.size}")

    spectral = [to_spectral(v) for v in velocities]
    grid = spectral[0].grid
    for v in spectral[1:]:
        if v.grid != grid:
            raise ContractViolationError("snapshots live on different grids")

    omega_hats = [curl(v) for v in spectral]
    omega_stack = np.stack(
        [np.stack([fft_inverse(c).values for c in w.components])
         for w in omega_hats])
    domega_dt = derivative_4th(omega_stack, h, axis=0)

    raw = np.empty(times.size)
    normalized = np.empty(times.size)
    for m in range(times.size):
        v_phys = [fft_inverse(c).values for c in spectral[m].components]
        w_phys = [fft_inverse(c).values for c in omega_hats[m].components]
        dv = [[fft_inverse(spectral_derivative(
            spectral[m].components[j], i)).values for j in range(3)]
            for i in range(3)]
        dw = [[fft_inverse(spectral_derivative(
            omega_hats[m].components[j], i)).values for j in range(3)]
            for i in range(3)]
        advect = [sum(v_phys[j] * dw[j][i] for j in range(3))
                  for i in range(3)]
        stretch = [sum(w_phys[j] * dv[j][i] for j in range(3))
                   for i in range(3)]
        worst = 0.0
        scale = 1e-300
        for i in range(3):
            res = domega_dt[m, i] + advect[i] - stretch[i]
            worst = max(worst, float(np.max(np.abs(res))))
            scale = max(scale,
                        float(np.max(np.abs(domega_dt[m, i]))),
                        float(np.max(np.abs(advect[i]))),
                        float(np.max(np.abs(stretch[i]))))
        raw[m] = worst
        normalized[m] = worst / scale
    return raw, normalized
