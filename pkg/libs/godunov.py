"""
First-order Godunov finite volumes for u_t + f(u)_x = 0 on an interval.

The numerical flux is the flux of the exact Riemann solution at the
interface; for a flux with a single extremum it reduces to comparisons with
the extremum. Boundary data enter through one ghost cell on each side: a
prescribed value (a step function of time) or zero-order extrapolation.
Every step's interface fluxes are kept, so the boundary traces and the
transport of rho * theta can be computed from the same run.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, FreeRegimeError, ValidationError
from .flux import FluxModel
from .profiles import StepFunction
from .traces import TraceSeries

log = logging.getLogger(__name__)

# Default Courant number; leaves a margin below 1 for the ghost-cell boundaries.
DEFAULT_CFL = 0.45

# Lower bound on the wave speed used by the time step.
SPEED_FLOOR = 1e-12

# Slack when checking data against [0, rho_star].
RANGE_TOLERANCE = 1e-12

# Steps shorter than this fraction of the horizon finish the run.
END_TOLERANCE = 1e-14


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``n_cells`` cells on [alpha, beta]."""

    alpha: float
    beta: float
    n_cells: int

    def __post_init__(self):
        if int(self.n_cells) < 2:
            raise ValidationError(f"a grid needs at least 2 cells, got {self.n_cells}")
        if not self.beta > self.alpha:
            raise ValidationError(f"grid interval [{self.alpha}, {self.beta}] is empty")

    @property
    def dx(self):
        return (self.beta - self.alpha) / self.n_cells

    @property
    def edges(self):
        return np.linspace(self.alpha, self.beta, self.n_cells + 1)

    @property
    def centers(self):
        edges = self.edges
        return 0.5 * (edges[1:] + edges[:-1])

    def cell_of(self, x):
        return int(np.clip(np.floor((x - self.alpha) / self.dx), 0, self.n_cells - 1))

    def averages(self, profile):
        """Exact cell averages of a StepFunction, or a checked copy of an array."""
        if isinstance(profile, StepFunction):
            return profile.cell_averages(self.edges)
        values = np.asarray(profile, dtype=float)
        if values.shape != (self.n_cells,):
            raise ValidationError(f"expected {self.n_cells} cell values, got shape {values.shape}")
        return values.copy()

    def refined(self, factor=2):
        return Grid(self.alpha, self.beta, self.n_cells * factor)


def godunov_flux(a, b, flux):
    """
    Godunov numerical flux between left state ``a`` and right state ``b``.

    The minimum of f over [a, b] when a <= b, the maximum over [b, a] when
    a > b. Vectorized over arrays.

    Args:
        a: Left state(s).
        b: Right state(s).
        flux (ScalarFlux): Flux with ``kind`` and ``extremum``.

    Returns:
        The interface flux, a float for scalar input.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    fa, fb = flux(a), flux(b)
    c = flux.extremum
    fc = float(flux(c)) if math.isfinite(c) else 0.0

    if flux.kind == "max":
        inside = (b <= c) & (c <= a)
        out = np.where(a <= b, np.minimum(fa, fb), np.where(inside, fc, np.maximum(fa, fb)))
    else:
        inside = (a <= c) & (c <= b)
        out = np.where(a <= b, np.where(inside, fc, np.minimum(fa, fb)), np.maximum(fa, fb))
    return out if out.ndim else float(out)


def cfl_dt(state, flux, cfl, dx, cap=math.inf):
    """
    Time step from the CFL condition.

    Args:
        state (np.ndarray): Cell values, ghost cells included if any.
        flux (ScalarFlux): The flux.
        cfl (float): Courant number in (0, 1].
        dx (float): Cell width.
        cap (float): Upper bound, typically the time left to the horizon.

    Returns:
        float: cfl * dx / max(|f'|, 1e-12), capped.
    """
    if not 0 < cfl <= 1:
        raise ValidationError(f"CFL number must be in (0, 1], got {cfl}")
    speed = float(np.max(np.abs(flux.derivative(np.asarray(state, dtype=float)))))
    return min(cfl * dx / max(speed, SPEED_FLOOR), cap)


def transport_dt(state, model, cfl, dx, cap=math.inf):
    """
    CFL step that also keeps the upwind transport of rho * theta monotone,
    i.e. bounds the vehicle speed v as well as the wave speed g'.
    """
    dt = cfl_dt(state, model, cfl, dx, cap)
    speed = float(np.max(np.abs(model.v(np.asarray(state, dtype=float)))))
    return min(dt, cfl * dx / max(speed, SPEED_FLOOR))


def godunov_step(u, left_ghost, right_ghost, flux, dt, dx):
    """
    One forward-Euler Godunov step.

    Returns:
        tuple[np.ndarray, np.ndarray]: New cell values and the n+1 interface fluxes.
    """
    extended = np.concatenate(([left_ghost], u, [right_ghost]))
    fluxes = godunov_flux(extended[:-1], extended[1:], flux)
    return u - (dt / dx) * np.diff(fluxes), fluxes


@dataclass(frozen=True)
class GridSolution:
    """
    Finite-volume run on one road.

    ``states[n]`` holds the cell averages at ``times[n]`` and ``fluxes[n]``
    the interface fluxes used on ``[times[n], times[n+1])``.
    """

    grid: Grid
    flux: object
    times: np.ndarray
    states: np.ndarray
    fluxes: np.ndarray

    @property
    def step_times(self):
        return self.times[:-1]

    @property
    def dts(self):
        return np.diff(self.times)

    @property
    def end_time(self):
        return float(self.times[-1])

    @property
    def left_flux_trace(self):
        return TraceSeries(
            self.step_times, self.fluxes[:, 0], self.end_time, "flow", "alpha+", getattr(self.flux, "q_max", None)
        )

    @property
    def right_flux_trace(self):
        return TraceSeries(
            self.step_times, self.fluxes[:, -1], self.end_time, "flow", "beta-", getattr(self.flux, "q_max", None)
        )

    def level_index(self, t):
        """Index of the last completed step at or before t."""
        idx = int(np.searchsorted(self.times, t + END_TOLERANCE * max(1.0, abs(t)), side="right"))
        return max(idx - 1, 0)

    def at(self, t):
        return self.states[self.level_index(t)]

    @property
    def rho(self):
        return self.states

    def recorded(self, output_times):
        """Levels at the requested output times (last completed step at or before each)."""
        idx = [self.level_index(t) for t in output_times]
        return self.times[idx], self.states[idx]

    def mass(self):
        return self.states.sum(axis=1) * self.grid.dx

    def conservation_residual(self):
        """Largest relative defect of mass change against boundary fluxes per step."""
        if self.fluxes.shape[0] == 0:
            return 0.0
        change = np.diff(self.mass())
        boundary = self.dts * (self.fluxes[:, 0] - self.fluxes[:, -1])
        scale = max(1.0, float(np.max(np.abs(self.mass()))))
        return float(np.max(np.abs(change - boundary)) / scale)

    def rows(self, output_times):
        """CSV rows ``(t, x_center, rho)`` at the output times."""
        times, states = self.recorded(output_times)
        centers = self.grid.centers
        return [(t, x, r) for t, state in zip(times, states) for x, r in zip(centers, state)]

    def trace_rows(self):
        """CSV rows ``(t, flux_left, flux_right)``."""
        return list(zip(self.step_times, self.fluxes[:, 0], self.fluxes[:, -1]))


class GridRecorder:
    """Accumulates steps of a run and freezes them into a GridSolution."""

    def __init__(self, grid, flux, u0, t0=0.0):
        self.grid = grid
        self.flux = flux
        self.times = [float(t0)]
        self.states = [np.array(u0, dtype=float)]
        self.fluxes = []

    @property
    def time(self):
        return self.times[-1]

    @property
    def state(self):
        return self.states[-1]

    def append(self, dt, fluxes, state, time=None):
        if not dt > 0:
            raise ConsistencyError(f"non-positive time step {dt!r} at t={self.time:.17g}")
        self.times.append(self.time + dt if time is None else float(time))
        self.fluxes.append(fluxes)
        self.states.append(state)

    def build(self):
        n = self.grid.n_cells
        fluxes = np.array(self.fluxes) if self.fluxes else np.empty((0, n + 1))
        return GridSolution(self.grid, self.flux, np.array(self.times), np.array(self.states), fluxes)


def _ghost(datum, t):
    return None if datum is None else float(datum(t))


def godunov_evolve(u0, flux, grid, T, left=None, right=None, cfl=DEFAULT_CFL, dt=None, dt_rule=None):
    """
    Runs the Godunov scheme from ``u0`` up to time ``T``.

    Args:
        u0: Initial datum (StepFunction or cell values).
        flux (ScalarFlux): The flux.
        grid (Grid): The grid.
        T (float): Final time.
        left (StepFunction, optional): Left ghost value as a function of time;
            zero-order extrapolation when omitted.
        right (StepFunction, optional): Right ghost value; extrapolation when omitted.
        cfl (float): Courant number.
        dt (float, optional): Fixed time step (the last step is shortened to hit T).
        dt_rule (callable, optional): ``dt_rule(state, cfl, dx, cap)`` replacing ``cfl_dt``.

    Returns:
        GridSolution: The run with every step recorded.
    """
    if T < 0:
        raise ValidationError(f"final time must be non-negative, got {T}")
    recorder = GridRecorder(grid, flux, grid.averages(u0))
    dx = grid.dx

    while recorder.time < T - END_TOLERANCE * max(1.0, T):
        t, u = recorder.time, recorder.state
        gl = _ghost(left, t)
        gr = _ghost(right, t)
        gl = u[0] if gl is None else gl
        gr = u[-1] if gr is None else gr

        remaining = T - t
        if dt is not None:
            step = min(dt, remaining)
        elif dt_rule is not None:
            step = dt_rule(np.concatenate(([gl], u, [gr])), cfl, dx, remaining)
        else:
            step = cfl_dt(np.concatenate(([gl], u, [gr])), flux, cfl, dx, remaining)

        u_new, fluxes = godunov_step(u, gl, gr, flux, step, dx)
        recorder.append(step, fluxes, u_new)

    solution = recorder.build()
    log.debug(
        "godunov: %d cells, %d steps to T=%g", grid.n_cells, solution.fluxes.shape[0], T
    )
    return solution


def check_free_regime(model, profile, name):
    """Raises FreeRegimeError unless the datum lies in [0, rho_star]."""
    values = profile.values if isinstance(profile, StepFunction) else np.asarray(profile)
    low, high = float(np.min(values)), float(np.max(values))
    if low < -RANGE_TOLERANCE or high > model.rho_star + RANGE_TOLERANCE:
        raise FreeRegimeError(
            f"{name} must lie in the free regime [0, {model.rho_star:.17g}], "
            f"got range [{low:.17g}, {high:.17g}]"
        )


def solve_ibvp_fv(rho0, inflow, model, grid, T, cfl=DEFAULT_CFL, dt=None, transport_stable=True):
    """
    Density on one road in the free regime.

    The inflow ghost cell is set to the boundary datum rho_bar(t^n); the
    outflow ghost copies the last cell.

    Args:
        rho0: Initial density (StepFunction or cell values) in [0, rho_star].
        inflow (StepFunction): Boundary density at alpha as a function of time.
        model (FluxModel): The traffic flux.
        grid (Grid): The grid.
        T (float): Final time.
        cfl (float): Courant number.
        dt (float, optional): Fixed time step.
        transport_stable (bool): Also bound the step by the vehicle speed, as
            required when the run drives a theta transport.

    Returns:
        GridSolution: The run.
    """
    if not isinstance(model, FluxModel):
        raise ValidationError("solve_ibvp_fv needs a traffic FluxModel")
    inflow = StepFunction.from_config(inflow, name="inflow")
    if isinstance(rho0, (int, float)):
        rho0 = StepFunction.constant(rho0)
    check_free_regime(model, rho0, "initial density")
    check_free_regime(model, inflow.restricted(0.0, T) if T > 0 else inflow, "inflow density")

    def rule(state, c, dx, cap):
        return transport_dt(state, model, c, dx, cap)

    return godunov_evolve(
        rho0,
        model,
        grid,
        T,
        left=inflow,
        right=None,
        cfl=cfl,
        dt=dt,
        dt_rule=rule if transport_stable else None,
    )
