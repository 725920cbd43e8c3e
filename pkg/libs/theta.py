"""
Transport of the path fraction theta by the traffic velocity.

The conserved variable is m = rho * theta. The solver is slaved to a finished
density run: it reuses its time levels and interface fluxes F and moves m
with Q = F * theta_upwind, where the inflow interface uses the boundary
fraction theta_bar(t^n). On vacuum cells theta is not determined by the
data; the rule used there only affects fluxes that are themselves ~0.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import CouplingError, UnsupportedRegimeError, ValidationError
from .profiles import StepFunction
from .traces import TraceSeries

log = logging.getLogger(__name__)

# Cells with rho at or below VACUUM_RATIO * rho_max count as vacuum.
VACUUM_RATIO = 1e-10

# Drive fluxes more negative than this break the upwind direction.
NEGATIVE_FLUX_TOLERANCE = 1e-14

VACUUM_RULES = ("upwind", "boundary")


@dataclass(frozen=True)
class ThetaSolution:
    """m = rho * theta on the grid and time levels of its driving density run."""

    grid: object
    times: np.ndarray
    rho: np.ndarray
    mass: np.ndarray
    fluxes: np.ndarray
    vacuum_eps: float

    @property
    def end_time(self):
        return float(self.times[-1])

    @property
    def step_times(self):
        return self.times[:-1]

    @property
    def theta_view(self):
        """theta = m / rho clipped to [0, 1]; NaN on vacuum cells."""
        with np.errstate(divide="ignore", invalid="ignore"):
            theta = np.clip(self.mass / self.rho, 0.0, 1.0)
        return np.where(self.rho > self.vacuum_eps, theta, np.nan)

    @property
    def left_flux_trace(self):
        return TraceSeries(self.step_times, self.fluxes[:, 0], self.end_time, "theta_flow", "alpha+")

    @property
    def right_flux_trace(self):
        return TraceSeries(self.step_times, self.fluxes[:, -1], self.end_time, "theta_flow", "beta-")

    def level_index(self, t):
        idx = int(np.searchsorted(self.times, t + 1e-14 * max(1.0, abs(t)), side="right"))
        return max(idx - 1, 0)

    def bounds_violation(self):
        """Largest violation of 0 <= m <= rho over all levels."""
        below = float(np.max(-self.mass, initial=0.0))
        above = float(np.max(self.mass - self.rho, initial=0.0))
        return max(below, above)

    def conservation_residual(self):
        if self.fluxes.shape[0] == 0:
            return 0.0
        totals = self.mass.sum(axis=1) * self.grid.dx
        boundary = np.diff(self.times) * (self.fluxes[:, 0] - self.fluxes[:, -1])
        return float(np.max(np.abs(np.diff(totals) - boundary)) / max(1.0, float(np.max(totals))))

    def rows(self, output_times):
        """CSV rows ``(t, x_center, rho, m, theta_or_nan)``."""
        theta = self.theta_view
        centers = self.grid.centers
        rows = []
        for t in output_times:
            k = self.level_index(t)
            rows.extend(
                (self.times[k], x, r, m, th)
                for x, r, m, th in zip(centers, self.rho[k], self.mass[k], theta[k])
            )
        return rows


def upwind_theta(rho, mass, theta_bar, vacuum_eps, rule="upwind"):
    """
    theta in every cell, with vacuum cells filled by ``rule``.

    ``"upwind"`` takes the nearest non-vacuum cell on the left and falls back
    to ``theta_bar``; ``"boundary"`` uses ``theta_bar`` on every vacuum cell.
    """
    vacuum = rho <= vacuum_eps
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(vacuum, np.nan, np.clip(mass / rho, 0.0, 1.0))
    if rule == "boundary":
        return np.where(vacuum, theta_bar, theta)

    extended = np.concatenate(([theta_bar], theta))
    filled = np.where(np.isnan(extended), 0, np.arange(extended.size))
    np.maximum.accumulate(filled, out=filled)
    return extended[filled][1:]


def solve_theta(drive, theta0, theta_in, vacuum_rule="upwind", vacuum_ratio=VACUUM_RATIO, grid=None):
    """
    Transports m = rho * theta along a finished density run.

    Args:
        drive (GridSolution): Density run with per-step interface fluxes.
        theta0 (StepFunction): Initial fraction on the road, values in [0, 1].
        theta_in (StepFunction): Boundary fraction at alpha as a function of time.
        vacuum_rule (str): ``"upwind"`` or ``"boundary"``.
        vacuum_ratio (float): Vacuum threshold relative to rho_max.
        grid (Grid, optional): Grid the caller expects; must match the drive's.

    Returns:
        ThetaSolution: The transported m with its boundary flux traces.
    """
    if grid is not None and grid != drive.grid:
        raise CouplingError(f"theta grid {grid} does not match the density grid {drive.grid}")
    if drive.fluxes.shape != (drive.times.size - 1, drive.grid.n_cells + 1):
        raise CouplingError("density run does not carry one flux row per time step")
    if vacuum_rule not in VACUUM_RULES:
        raise ValidationError(f"unknown vacuum rule {vacuum_rule!r}")

    theta0 = StepFunction.from_config(theta0, name="theta0")
    theta_in = StepFunction.from_config(theta_in, name="theta_in")
    for name, profile in (("theta0", theta0), ("theta_in", theta_in)):
        low, high = profile.range()
        if low < 0 or high > 1:
            raise ValidationError(f"{name} must lie in [0, 1], got [{low}, {high}]")

    lowest = float(np.min(drive.fluxes, initial=0.0))
    if lowest < -NEGATIVE_FLUX_TOLERANCE:
        raise UnsupportedRegimeError(
            f"density run has a negative interface flux {lowest:.3g}; upwind transport "
            "of theta needs rightward traffic"
        )

    rho_max = getattr(drive.flux, "rho_max", 1.0)
    vacuum_eps = vacuum_ratio * rho_max
    dx = drive.grid.dx
    states = drive.states
    mass = np.empty_like(states)
    mass[0] = states[0] * drive.grid.averages(theta0)
    q = np.empty_like(drive.fluxes)

    for n, (t, dt) in enumerate(zip(drive.step_times, drive.dts)):
        bar = float(theta_in(t))
        theta = upwind_theta(states[n], mass[n], bar, vacuum_eps, vacuum_rule)
        q[n] = drive.fluxes[n] * np.concatenate(([bar], theta))
        mass[n + 1] = mass[n] - (dt / dx) * np.diff(q[n])

    log.debug("theta transport: %d steps on %d cells", q.shape[0], drive.grid.n_cells)
    return ThetaSolution(drive.grid, drive.times, states, mass, q, vacuum_eps)


def theta_of(sol, t, x):
    """
    theta at (t, x), or None on vacuum where it is not determined.

    Args:
        sol (ThetaSolution): The solution.
        t (float): Time; the last completed level at or before t is used.
        x (float): Position in the road.

    Returns:
        float | None: m / rho clipped to [0, 1].
    """
    k = sol.level_index(t)
    j = sol.grid.cell_of(x)
    rho = sol.rho[k, j]
    if rho <= sol.vacuum_eps:
        return None
    return float(np.clip(sol.mass[k, j] / rho, 0.0, 1.0))


def renormalization_defect(drive, theta0, theta_in):
    """
    L1 distance (space-time) between the transport of theta**2 and the square
    of the transported theta, on cells away from vacuum.
    """
    theta0 = StepFunction.from_config(theta0)
    theta_in = StepFunction.from_config(theta_in)
    plain = solve_theta(drive, theta0, theta_in)
    squared = solve_theta(drive, theta0.map(np.square), theta_in.map(np.square))

    rho = plain.rho
    safe = rho > 1e3 * plain.vacuum_eps
    with np.errstate(divide="ignore", invalid="ignore"):
        renormalized = np.where(safe, plain.mass**2 / rho, 0.0)
    defect = np.where(safe, np.abs(squared.mass - renormalized), 0.0)
    weights = np.append(np.diff(drive.times), 0.0)
    return float(np.sum(defect.sum(axis=1) * weights) * drive.grid.dx)
