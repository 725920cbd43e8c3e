"""
Closed-form Burgers solution whose flux trace stays BV while the state trace
at x = 0 does not.

The shock curve gamma is assembled from cubic blocks

    gamma_hat_eps(s) = s**3 / (2 eps) - 1.5 s**2 + eps s,    s in [0, eps)

with eps_n = 2**-(n+1), block n starting at tau_n = 1/8 - 2**-n and carrying
the sign (-1)**n, for n = 3, 4, ... The state is -1 right of gamma and is
carried to the shock from the left along straight characteristics of speed
2u, so the datum is recovered by following the characteristic that hits the
shock at time t back to time 0.
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import optimize

from .diagnostics import tv_report
from .errors import ConsistencyError, ValidationError
from .flux import burgers
from .godunov import Grid, godunov_evolve
from .profiles import StepFunction

log = logging.getLogger(__name__)

FIRST_BLOCK = 3

# Points used to check that the feet of the characteristics move left.
MONOTONICITY_POINTS = 10_000

ROOT_TOLERANCE = 1e-12

# Offset left of the shock used to read the state on its left side.
SHOCK_OFFSET = 1e-9

# Frozen bound for the variation of w = u**2 at x = 0.
W_TV_BOUND = 1.5


def gamma_hat(eps, s):
    return s**3 / (2.0 * eps) - 1.5 * s**2 + eps * s


def gamma_hat_prime(eps, s):
    return 1.5 * s**2 / eps - 3.0 * s + eps


@dataclass(frozen=True)
class CounterexampleSpec:
    """
    Shock curve made of ``n_blocks`` cubic blocks, the first one with n = 3.

    Attributes:
        n_blocks (int): Number of blocks.
    """

    n_blocks: int = 6

    def __post_init__(self):
        if int(self.n_blocks) < 1:
            raise ValidationError(f"counterexample needs at least one block, got {self.n_blocks}")

    @property
    def indices(self):
        return np.arange(FIRST_BLOCK, FIRST_BLOCK + self.n_blocks)

    @property
    def horizon(self):
        return 0.125 - 2.0 ** -(FIRST_BLOCK + self.n_blocks)

    @property
    def epsilons(self):
        return 2.0 ** -(self.indices + 1.0)

    @property
    def starts(self):
        return 0.125 - 2.0 ** -self.indices.astype(float)

    @property
    def signs(self):
        return np.where(self.indices % 2 == 0, 1.0, -1.0)

    @property
    def sample_times(self):
        """Mid-block times sigma_n = 1/8 - 1.5 * 2**-(n+1); the shock is off x = 0 there."""
        return 0.125 - 1.5 * 2.0 ** -(self.indices + 1.0)

    @cached_property
    def r(self):
        """Left end of the nonconstant part of the datum."""
        return -float(foot(self, self.horizon, 0.0))

    @property
    def tv_bound(self):
        """Bound on the variation of the datum: 5 + sum of 2**-(n+2)."""
        return 5.0 + float(np.sum(2.0 ** -(self.indices + 2.0)))


def _gamma_arrays(spec, t, closed):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > spec.horizon) or (not closed and np.any(t >= spec.horizon)):
        interval = "]" if closed else ")"
        raise ValidationError(f"time outside [0, {spec.horizon!r}{interval}")
    idx = np.searchsorted(spec.starts, t, side="right") - 1
    idx = np.clip(idx, 0, spec.n_blocks - 1)
    s = t - spec.starts[idx]
    eps = spec.epsilons[idx]
    sign = spec.signs[idx]
    return sign * gamma_hat(eps, s), sign * gamma_hat_prime(eps, s)


def gamma_curve(spec, t, closed=False):
    """
    Shock position and slope at time t.

    Args:
        spec (CounterexampleSpec): The construction.
        t (float | np.ndarray): Time in [0, horizon), or [0, horizon] with ``closed``.
        closed (bool): Accept the horizon itself (end of the last block).

    Returns:
        tuple: ``(position, slope)``, floats for scalar input.
    """
    position, slope = _gamma_arrays(spec, t, closed)
    if np.ndim(position) == 0:
        return float(position), float(slope)
    return position, slope


def foot(spec, t, s):
    """
    Position at time s of the characteristic reaching the shock at time t.

    Args:
        spec (CounterexampleSpec): The construction.
        t (float | np.ndarray): Time at which the characteristic meets the shock.
        s (float): Earlier time.

    Returns:
        float | np.ndarray: The position.
    """
    position, slope = gamma_curve(spec, t, closed=True)
    speed = 2.0 * (1.0 + slope)
    return speed * s + position - speed * t


def check_monotone_feet(spec, points=MONOTONICITY_POINTS):
    """
    Raises ConsistencyError unless the feet of the characteristics decrease
    strictly with the time at which they reach the shock.
    """
    ts = np.linspace(0.0, spec.horizon, points)
    feet = foot(spec, ts, 0.0)
    steps = np.diff(feet)
    if np.any(steps >= 0):
        worst = int(np.argmax(steps))
        raise ConsistencyError(
            f"characteristics cross: foot does not decrease near t={ts[worst]:.17g}"
        )
    return float(np.max(steps))


def _hitting_time(spec, x):
    """Time t at which the characteristic starting from x reaches the shock."""
    h = spec.horizon

    def residual(t):
        return foot(spec, t, 0.0) - x

    at_start, at_end = residual(0.0), residual(h)
    if at_start == 0:
        return 0.0
    if at_end == 0:
        return h
    if at_start * at_end > 0:
        raise ConsistencyError(f"no characteristic from x={x!r} reaches the shock")
    return optimize.brentq(residual, 0.0, h, xtol=ROOT_TOLERANCE)


@dataclass(frozen=True)
class CounterexampleDatum:
    """The initial datum: 0 left of -r, 1 + gamma'(phi(x)) on [-r, 0], -1 right of 0."""

    spec: CounterexampleSpec
    r: float
    xs: np.ndarray
    values: np.ndarray

    def __call__(self, x):
        if x > 0:
            return -1.0
        if x < -self.r:
            return 0.0
        _, slope = gamma_curve(self.spec, _hitting_time(self.spec, x), closed=True)
        return 1.0 + slope

    def step_function(self):
        """Tabulated datum as a step function, one piece per table point."""
        mids = 0.5 * (self.xs[1:] + self.xs[:-1])
        points = np.concatenate(([-self.r], mids, [0.0]))
        values = np.concatenate(([0.0], self.values, [-1.0]))
        return StepFunction(points, values)

    def total_variation(self):
        return self.step_function().total_variation()


def counterexample_initial_datum(spec, points=2001):
    """
    Reconstructs the initial datum from the shock curve.

    Args:
        spec (CounterexampleSpec): The construction.
        points (int): Table size on [-r, 0].

    Returns:
        CounterexampleDatum: The datum with its table.
    """
    check_monotone_feet(spec)
    r = spec.r
    xs = np.linspace(-r, 0.0, points)
    hits = np.array([_hitting_time(spec, x) for x in xs])
    _, slopes = gamma_curve(spec, hits, closed=True)
    log.debug("counterexample datum: r=%.17g, %d table points", r, points)
    return CounterexampleDatum(spec, r, xs, 1.0 + np.asarray(slopes))


def counterexample_exact_u(spec, t, x):
    """
    Exact state at (t, x).

    Right of the shock the state is -1. Left of it, the characteristic
    through (t, x) is the one that reaches the shock at the time t' in
    [t, horizon] with foot(t', t) = x, and it carries 1 + gamma'(t'). Left of
    the last characteristic lies the rarefaction fan from x = -r, and 0
    further left.

    Args:
        spec (CounterexampleSpec): The construction.
        t (float): Time in [0, horizon).
        x (float): Position.

    Returns:
        float: u(t, x).
    """
    position, slope = gamma_curve(spec, t)
    if x > position:
        return -1.0
    if x == position:
        return 1.0 + slope

    h = spec.horizon

    def residual(tp):
        return foot(spec, tp, t) - x

    at_end = residual(h)
    if at_end > 0:
        # left of every characteristic that reaches the shock
        r = spec.r
        if x < -r or t == 0:
            return 0.0
        return (x + r) / (2.0 * t)
    if at_end == 0:
        return 1.0 + gamma_curve(spec, h, closed=True)[1]
    try:
        hit = optimize.brentq(residual, t, h, xtol=ROOT_TOLERANCE)
    except ValueError as e:
        raise ConsistencyError(f"cannot bracket the characteristic through ({t}, {x})") from e
    return 1.0 + gamma_curve(spec, hit, closed=True)[1]


def rankine_hugoniot_residual(spec, samples=100):
    """Largest |gamma'(t) - (u_minus(t) - 1)| over sample times in [0, horizon)."""
    ts = np.linspace(0.0, spec.horizon, samples, endpoint=False)
    worst = 0.0
    for t in ts:
        position, slope = gamma_curve(spec, t)
        left = counterexample_exact_u(spec, t, position - SHOCK_OFFSET)
        worst = max(worst, abs(slope - (left - 1.0)))
    return worst


def fan_clearance(spec, times):
    """
    Largest right edge of the rarefaction fan at the given times; it must
    stay left of x = 0.
    """
    edges = np.array([foot(spec, spec.horizon, t) for t in times])
    clearance = float(np.max(edges))
    if clearance >= 0:
        raise ConsistencyError(f"rarefaction fan reaches x = 0 (right edge {clearance:.3g})")
    return clearance


@dataclass(frozen=True)
class CounterexampleReport:
    spec: CounterexampleSpec
    r: float
    sigma_times: np.ndarray
    sigma_values: np.ndarray
    tv_lower_bound: float
    u_trace: object
    w_trace: object
    tv_u0: float
    tv_u0_bound: float
    rh_residual: float
    fan_clearance: float
    numerical: object = None

    def summary(self):
        summary = {
            "n_blocks": self.spec.n_blocks,
            "horizon": self.spec.horizon,
            "r": self.r,
            "tv_lower_bound": self.tv_lower_bound,
            "tv_u_x0": self.u_trace.total,
            "tv_w_x0": self.w_trace.total,
            "tv_w_bound": W_TV_BOUND,
            "tv_u0": self.tv_u0,
            "tv_u0_bound": self.tv_u0_bound,
            "rh_residual": self.rh_residual,
            "fan_clearance": self.fan_clearance,
        }
        if self.numerical is not None:
            summary["tv_u_x0_numerical"] = self.numerical.total
        return summary

    def rows(self):
        """CSV rows ``(t, u, w)`` of the sampled trace at x = 0."""
        return [
            (t, u, u * u) for t, u in zip(self.u_trace.times, self.u_trace.values)
        ]


def numerical_trace_at_zero(spec, datum, n_cells=2000):
    """
    Finite-volume Burgers run on [-r-1, 1] with ghost states 0 and -1, and the
    variation of the state of the cell containing x = 0.
    """
    left_end = -spec.r - 1.0
    grid = Grid(left_end, 1.0, n_cells)
    run = godunov_evolve(
        datum.step_function(),
        burgers(),
        grid,
        spec.horizon,
        left=StepFunction.constant(0.0),
        right=StepFunction.constant(-1.0),
    )
    cell = grid.cell_of(0.0)
    return tv_report(run.times, run.states[:, cell], 0.0, resolution=grid.dx, label="u_fv")


def tv_blowup_report(spec, samples=4000, fv_cells=0):
    """
    Variation of u(., 0) and of w(., 0) = u(., 0)**2 for the construction.

    The lower bound uses the mid-block times only; the traces add a uniform
    grid of ``samples`` times.

    Args:
        spec (CounterexampleSpec): The construction.
        samples (int): Uniform sample times on [0, horizon).
        fv_cells (int): Cells of the finite-volume cross-check; 0 skips it.

    Returns:
        CounterexampleReport: The report.
    """
    datum = counterexample_initial_datum(spec)
    sigma = spec.sample_times
    sigma_values = np.array([counterexample_exact_u(spec, t, 0.0) for t in sigma])

    times = np.union1d(np.linspace(0.0, spec.horizon, samples, endpoint=False), sigma)
    clearance = fan_clearance(spec, times)
    values = np.array([counterexample_exact_u(spec, t, 0.0) for t in times])

    report = CounterexampleReport(
        spec=spec,
        r=spec.r,
        sigma_times=sigma,
        sigma_values=sigma_values,
        tv_lower_bound=float(np.sum(np.abs(np.diff(sigma_values)))),
        u_trace=tv_report(times, values, 0.0, resolution=spec.horizon / samples, label="u"),
        w_trace=tv_report(times, values**2, 0.0, resolution=spec.horizon / samples, label="w"),
        tv_u0=datum.total_variation(),
        tv_u0_bound=spec.tv_bound,
        rh_residual=rankine_hugoniot_residual(spec),
        fan_clearance=clearance,
        numerical=numerical_trace_at_zero(spec, datum, fv_cells) if fv_cells else None,
    )
    log.info(
        "counterexample with %d blocks: TV u(.,0) >= %.6g, TV w(.,0) = %.6g, TV u0 = %.6g",
        spec.n_blocks,
        report.tv_lower_bound,
        report.w_trace.total,
        report.tv_u0,
    )
    return report


def tv_growth(max_blocks):
    """
    Lower bound of TV u(., 0) for 1..max_blocks blocks and its least-squares
    slope per block.

    Returns:
        tuple[list[int], list[float], float]: Block counts, lower bounds and the slope.
    """
    counts = list(range(1, int(max_blocks) + 1))
    bounds = []
    for n in counts:
        spec = CounterexampleSpec(n)
        values = [counterexample_exact_u(spec, t, 0.0) for t in spec.sample_times]
        bounds.append(float(np.sum(np.abs(np.diff(values)))))
    slope = float(np.polyfit(counts, bounds, 1)[0]) if len(counts) > 1 else 0.0
    log.info("TV u(., 0) lower bounds %s: slope %.4g per block", bounds, slope)
    return counts, bounds, slope
