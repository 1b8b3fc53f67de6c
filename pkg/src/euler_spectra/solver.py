"""Time integration of the incompressible Euler / Navier-Stokes equations.

The momentum equation is advanced in rotational form,

    dv/dt = P[ v x omega ] - nu * |k|^2 * v ,

where P is the solenoidal projection and the cross product is evaluated
pointwise in physical space and dealiased by the 2/3 rule before
projection.  The rotational form conserves kinetic energy exactly in
the spatial semidiscretization (the pressure-gradient part is removed
by P; the aliasing residue is removed by the mask), so at nu = 0 energy
drift measures only the time integrator.

Time stepping is the classical fourth-order Runge-Kutta scheme.  The
state is re-projected after each full step: the RK combination of
projected stages is already solenoidal in exact arithmetic, so this
only sweeps up rounding, but it pins the divergence at machine zero
over long runs.
"""

import logging
from dataclasses import dataclass

import numpy as np

from euler_spectra.errors import ConfigurationError, NumericsError
from euler_spectra.fields import (
    VectorField,
    cross_product,
    curl,
    dealias_23,
    fft_forward,
    fft_inverse,
    leray_project,
    max_speed,
    to_spectral,
)

logger = logging.getLogger("euler_spectra.solver")

# Steps between CFL samplings during run(); each sample costs three
# inverse transforms, so checking every step would tax small grids.
_CFL_CHECK_STRIDE = 25


@dataclass
class SolverConfig:
    """Time-integration parameters.

    Attributes
    ----------
    dt : float
        Time step, > 0.
    t_final : float
        End time, >= 0 and an integer multiple of dt (a zero makes
        run() a no-op that returns the projected initial state).
    nu : float
        Kinematic viscosity, >= 0; zero selects the inviscid equations.
    dealias : bool
        Apply the 2/3-rule mask to the nonlinear term.  Disabling it is
        only useful for demonstrating aliasing errors.
    cfl_warning : float
        Advective CFL number above which run() logs a warning.
    """

    dt: float
    t_final: float
    nu: float = 0.0
    dealias: bool = True
    cfl_warning: float = 0.5

    def __post_init__(self):
        if not (self.dt > 0.0 and np.isfinite(self.dt)):
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not (self.t_final >= 0.0 and np.isfinite(self.t_final)):
            raise ConfigurationError(
                f"t_final must be >= 0, got {self.t_final}")
        if not (self.nu >= 0.0 and np.isfinite(self.nu)):
            raise ConfigurationError(f"nu must be >= 0, got {self.nu}")
        if not self.cfl_warning > 0.0:
            raise ConfigurationError(
                f"cfl_warning must be positive, got {self.cfl_warning}")

    def step_count(self) -> int:
        """Number of steps to reach t_final, validating divisibility."""
        steps = int(round(self.t_final / self.dt))
        if abs(steps * self.dt - self.t_final) > 1e-9 * max(self.dt, 1.0):
            raise ConfigurationError(
                f"t_final={self.t_final} is not an integer multiple of "
                f"dt={self.dt}")
        return steps


@dataclass
class SolverState:
    """Solver state: spectral velocity plus clock and step counter."""

    t: float
    v: VectorField
    step_index: int = 0

    def __post_init__(self):
        if not self.v.is_spectral:
            raise ConfigurationError("solver state velocity must be spectral")


def rhs(v: VectorField, nu: float = 0.0, dealias: bool = True) -> VectorField:
    """Right-hand side of the momentum equation for a spectral velocity.

    Rotational form: transform to physical space, form v x omega, come
    back, mask, project, and add the diffusion term.  Nine transforms
    per evaluation.
    """
    grid = v.grid
    v_phys = fft_inverse(v)
    omega_phys = fft_inverse(curl(v))
    nonlinear = fft_forward(cross_product(v_phys, omega_phys))
    if dealias:
        nonlinear = dealias_23(nonlinear)
    out = leray_project(nonlinear)
    if nu != 0.0:
        damp = nu * grid.k_squared
        out = VectorField.spectral(
            grid, tuple(o - damp * u for o, u in zip(out.arrays(),
                                                     v.arrays())))
    return out


def _check_finite(v: VectorField, step_index: int, t: float):
    for label, arr in zip("123", v.arrays()):
        if not np.all(np.isfinite(arr)):
            raise NumericsError(
                f"non-finite velocity component v{label} after step "
                f"{step_index} (t={t:.6g}); last good state was step "
                f"{step_index - 1}",
                step_index=step_index, time=t)


def step_rk4(state: SolverState, config: SolverConfig) -> SolverState:
    """Advance one classical RK4 step and re-project the result.

    Raises
    ------
    NumericsError
        If the updated velocity contains NaN or Inf; the exception
        records the failing step index and time.
    """
    dt = config.dt
    v = state.v
    k1 = rhs(v, config.nu, config.dealias)
    k2 = rhs(v + (0.5 * dt) * k1, config.nu, config.dealias)
    k3 = rhs(v + (0.5 * dt) * k2, config.nu, config.dealias)
    k4 = rhs(v + dt * k3, config.nu, config.dealias)
    combo = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    new_v = leray_project(combo)
    new_index = state.step_index + 1
    new_t = new_index * dt + (state.t - state.step_index * dt)
    _check_finite(new_v, new_index, new_t)
    return SolverState(new_t, new_v, new_index)


def run(initial: VectorField, config: SolverConfig,
        observers=()) -> SolverState:
    """Integrate from t = 0 to t_final, notifying observers each step.

    The initial field is transformed (if physical) and projected, the
    observers are called once on the initial state and then after every
    step, and the final state is returned.  Observer exceptions
    propagate to the caller, aborting the run.

    The advective CFL number u_max * dt / dx is sampled at the start
    and every few dozen steps; exceeding ``config.cfl_warning`` logs a
    warning naming the offending value but does not stop the run.
    """
    steps = config.step_count()
    v0 = leray_project(to_spectral(initial))
    state = SolverState(0.0, v0, 0)
    _check_finite(v0, 0, 0.0)

    warned_cfl = False

    def check_cfl(s: SolverState):
        nonlocal warned_cfl
        if warned_cfl:
            return
        cfl = max_speed(s.v) * config.dt / s.v.grid.dx
        if cfl > config.cfl_warning:
            logger.warning(
                "advective CFL number %.3f exceeds %.3f at t=%.6g; "
                "results may be underresolved in time",
                cfl, config.cfl_warning, s.t)
            warned_cfl = True

    check_cfl(state)
    for obs in observers:
        obs(state)
    for _ in range(steps):
        state = step_rk4(state, config)
        if state.step_index % _CFL_CHECK_STRIDE == 0:
            check_cfl(state)
        for obs in observers:
            obs(state)
    return state
