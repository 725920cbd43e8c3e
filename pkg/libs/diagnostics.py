"""
Total-variation analytics and the experiments built on the solvers:
trace bounds for exact front tracking, flux-trace boundedness under grid
refinement, the Riemann datum -1 | +1, stability of the network solve under
data perturbations, BV propagation through junctions, and the cross-check
of front tracking against the Godunov scheme on the same lattice flux.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConsistencyError, ValidationError
from .flux import burgers, lwr_linear, piecewise_linearize
from .front_tracking import evolve, sample_space_profile, sample_time_trace, solve_ibvp_ft
from .godunov import Grid, godunov_evolve
from .network import Network, NetworkData, Road, solve_network
from .profiles import StepFunction

log = logging.getLogger(__name__)

# Relative spread of trace variations across refinement levels that still counts as bounded.
REFINEMENT_SPREAD = 0.10

# Variations below this are compared in absolute terms.
TV_FLOOR = 1e-2

# Curvature |u_xx| above which a final state counts as rough (a shock or the edge of a fan).
ROUGHNESS = 5.0

# Truncated line for the random Burgers traces; data live on (0, 1), speeds in [0, 1].
FLUX_TRACE_DOMAIN = (-0.5, 2.5)

# Random Burgers traces whose w variation stays below this are compared in absolute terms.
RANDOM_TRACE_FLOOR = 5e-2

# Allowed growth of the maximal variation from one refinement to the next.
BV_RATIO = 1.1

# Slack of the BV bound at the source road.
BV_SLACK = 1e-2

# Required reduction of the distances per halving of the perturbation.
STABILITY_RATIO = 1.5

# Stability distances at or below this are rounding noise.
DISTANCE_FLOOR = 1e-10


def total_variation(samples):
    """
    Sum of the absolute differences of consecutive samples.

    Args:
        samples: Ordered values, at least one.

    Returns:
        float: The variation on the sample partition.
    """
    values = np.asarray(samples, dtype=float)
    if values.size == 0:
        raise ValidationError("total variation needs at least one sample")
    return float(np.sum(np.abs(np.diff(values))))


@dataclass(frozen=True)
class TVReport:
    """
    Variation of a sampled trace at one location.

    ``total = positive + negative`` and ``positive - negative = end - start``.
    """

    location: float
    times: np.ndarray
    values: np.ndarray
    total: float
    positive: float
    negative: float
    resolution: float = math.nan
    label: str = ""

    def consistent(self, tolerance=1e-9):
        if self.values.size == 0:
            return True
        net = float(self.values[-1] - self.values[0])
        scale = max(1.0, self.total)
        return (
            abs(self.total - self.positive - self.negative) <= tolerance * scale
            and abs(self.positive - self.negative - net) <= tolerance * scale
        )

    def row(self):
        return (self.label, self.location, self.resolution, self.total, self.positive, self.negative)


def tv_report(times, values, location, resolution=math.nan, label=""):
    values = np.asarray(values, dtype=float)
    steps = np.diff(values)
    return TVReport(
        location=float(location),
        times=np.asarray(times, dtype=float),
        values=values,
        total=total_variation(values),
        positive=float(np.sum(np.maximum(steps, 0.0))),
        negative=float(np.sum(np.maximum(-steps, 0.0))),
        resolution=resolution,
        label=label,
    )


def random_step_datum(rng, n_jumps, lo, hi, support, tv_max=None, level=None):
    """
    Random step function with ``n_jumps`` jumps inside ``support``.

    Values are drawn in [lo, hi], rounded to the lattice 2**-level when
    ``level`` is given, and shrunk toward their mean when the variation
    exceeds ``tv_max``.
    """
    points = np.sort(rng.uniform(support[0], support[1], n_jumps))
    values = rng.uniform(lo, hi, n_jumps + 1)
    datum = StepFunction(points, values)
    if tv_max is not None and datum.total_variation() > tv_max:
        mean = float(np.mean(datum.values))
        scale = tv_max / datum.total_variation()
        datum = datum.map(lambda v: mean + (v - mean) * scale)
    if level is not None:
        step = 2.0**-level
        datum = datum.map(lambda v: np.clip(np.round(v / step) * step, lo, hi))
    return datum


# Front tracking trace bounds


def wft_trace_check(rng, n_data=50, n_positions=20, levels=(4, 6), T=1.0):
    """
    Variation of the exact one-sided time traces against the variation of the
    datum, for an increasing lattice flux (LWR restricted to [0, 1/2]).

    Returns:
        list[tuple]: ``(level, x, tv_trace, tv_datum)`` for every trace.
    """
    model = lwr_linear()
    fluxes = {level: piecewise_linearize(model, level, 0.0, model.rho_star) for level in levels}
    rows = []
    for i in range(n_data):
        level = levels[i % len(levels)]
        datum = random_step_datum(rng, int(rng.integers(2, 8)), 0.0, 0.5, (0.0, 1.0), 4.0, level)
        sol = evolve(datum, fluxes[level], T)
        tv_datum = sol.initial.total_variation()
        for x in rng.uniform(-0.5, 2.0, n_positions):
            trace = sample_time_trace(sol, x)
            rows.append((level, float(trace.position), trace.total_variation(), tv_datum))
    return rows


def wft_ibvp_check(rng, n_problems=20, n_positions=10, level=5, T=1.0):
    """
    Variation of the exact traces of boundary value problems on (0, 1)
    against TV(datum) + TV(boundary datum) + |datum(0+) - boundary datum(0+)|.

    Returns:
        list[tuple]: ``(x, tv_trace, bound)`` for every trace.
    """
    model = lwr_linear()
    flux = piecewise_linearize(model, level, 0.0, model.rho_star)
    rows = []
    for _ in range(n_problems):
        datum = random_step_datum(rng, int(rng.integers(1, 6)), 0.0, 0.5, (0.0, 1.0), 4.0, level)
        inflow = random_step_datum(rng, int(rng.integers(1, 4)), 0.0, 0.5, (0.0, T), 4.0, level)
        sol = solve_ibvp_ft(datum, inflow, flux, (0.0, 1.0), T)
        inside = sol.initial.restricted(0.0, 1.0)
        window = sol.inflow.restricted(0.0, T)
        bound = (
            inside.total_variation()
            + window.total_variation()
            + abs(float(sol.initial(0.0)) - float(sol.inflow(0.0)))
        )
        for x in rng.uniform(0.0, 1.0, n_positions):
            trace = sample_time_trace(sol, x)
            rows.append((float(trace.position), trace.total_variation(), bound))
        exit_trace = sol.boundary_trace("beta-")
        rows.append((1.0, exit_trace.total_variation(), bound))
    return rows


# Finite-volume flux traces


@dataclass(frozen=True)
class FluxTraceProblem:
    """A Cauchy problem truncated to ``domain`` (or a boundary value problem via ``left``)."""

    flux: object
    datum: StepFunction
    domain: tuple
    T: float
    left: StepFunction = None
    right: StepFunction = None


@dataclass(frozen=True)
class FluxTraceStudy:
    """Variation of w = f(u) time traces at several positions and resolutions."""

    positions: tuple
    resolutions: tuple
    reports: dict = field(default_factory=dict)
    floor: float = TV_FLOOR

    def variations(self, x):
        return [self.reports[(x, dx)].total for dx in self.resolutions]

    def spread(self, x):
        values = self.variations(x)
        return (max(values) - min(values)) / max(min(values), self.floor)

    def bounded(self, tolerance=REFINEMENT_SPREAD):
        return all(self.spread(x) <= tolerance for x in self.positions)

    def rows(self):
        return [self.reports[(x, dx)].row() for x in self.positions for dx in self.resolutions]


def _flux_trace_run(problem, dx):
    a, b = problem.domain
    grid = Grid(a, b, int(round((b - a) / dx)))
    return grid, godunov_evolve(
        problem.datum, problem.flux, grid, problem.T, left=problem.left, right=problem.right
    )


def _trace_study(xs, resolutions, runs, floor=TV_FLOOR):
    reports = {}
    for dx, (grid, run) in zip(resolutions, runs):
        for x in xs:
            interface = int(round((x - grid.alpha) / grid.dx))
            interface = min(max(interface, 0), grid.n_cells)
            reports[(x, dx)] = tv_report(
                run.step_times, run.fluxes[:, interface], x, resolution=dx, label="w"
            )
        log.info("flux traces at dx=%g: %d steps", dx, run.fluxes.shape[0])
    return FluxTraceStudy(tuple(xs), tuple(resolutions), reports, floor)


def _flux_trace_runs(problem, resolutions, threads):
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        return list(pool.map(lambda dx: _flux_trace_run(problem, dx), resolutions))


def verify_flux_trace_tv(problem, xs, resolutions, threads=1):
    """
    Variation of the flux time traces w(., x) under grid refinement.

    The trace at x is the numerical flux through the interface closest to x,
    sampled at every step.

    Args:
        problem (FluxTraceProblem): The problem.
        xs (list[float]): Positions inside the domain.
        resolutions (list[float]): Cell sizes.
        threads (int): Worker threads, one run per resolution.

    Returns:
        FluxTraceStudy: Reports per position and resolution.
    """
    study = _trace_study(xs, resolutions, _flux_trace_runs(problem, resolutions, threads))
    if not study.bounded():
        log.warning("flux trace variation is not stable under refinement")
    return study


def rough_positions(grid, state, threshold=ROUGHNESS):
    """Centers of the cells where the discrete curvature of ``state`` exceeds ``threshold``."""
    curvature = np.abs(np.diff(state, 2)) / grid.dx**2
    return grid.centers[1:-1][curvature > threshold]


def draw_positions(rng, n, interval, avoid, margin, attempts=100):
    """
    ``n`` uniform positions in ``interval``, redrawn while closer than
    ``margin`` to a point of ``avoid``.

    Returns:
        tuple[list[float], int]: The positions and the number of redraws.
    """
    avoid = np.asarray(avoid, dtype=float)
    xs, nudged = [], 0
    while len(xs) < n:
        if nudged > attempts * n:
            raise ConsistencyError(f"no position in {interval} is {margin} away from {avoid.size} points")
        x = float(rng.uniform(*interval))
        if avoid.size and np.min(np.abs(avoid - x)) < margin:
            nudged += 1
            continue
        xs.append(x)
    return xs, nudged


def random_flux_trace_check(
    rng, n_data=10, n_positions=10, resolutions=(4e-3, 2e-3, 1e-3), T=1.0, margin=3e-2, threads=1
):
    """
    Flux-trace variation of Burgers for random step data in [0, 1] (variation
    at most 4) at random positions, under grid refinement.

    The variation of the exact trace jumps at the jumps of the datum and at
    the shocks standing at time T, and the scheme only reaches the edges of
    the fans at time T at rate sqrt(dx). Positions closer than ``margin`` to
    a datum jump or to a rough cell of the finest final state are redrawn.
    Variations below ``RANDOM_TRACE_FLOOR`` are compared in absolute terms.

    Returns:
        list[tuple[StepFunction, FluxTraceStudy]]: One study per datum.
    """
    flux = burgers()
    finest = int(np.argmin(resolutions))
    results = []
    for i in range(n_data):
        datum = random_step_datum(rng, int(rng.integers(2, 6)), 0.0, 1.0, (0.0, 1.0), tv_max=4.0)
        problem = FluxTraceProblem(flux, datum, FLUX_TRACE_DOMAIN, T)
        runs = _flux_trace_runs(problem, resolutions, threads)
        grid, run = runs[finest]
        avoid = np.concatenate((datum.breakpoints, rough_positions(grid, run.states[-1])))
        xs, nudged = draw_positions(rng, n_positions, (0.0, 2.0), avoid, margin)
        study = _trace_study(xs, resolutions, runs, floor=RANDOM_TRACE_FLOOR)
        log.info(
            "datum %d: TV=%.4g, %d positions redrawn, max spread %.4g",
            i,
            datum.total_variation(),
            nudged,
            max(study.spread(x) for x in xs),
        )
        results.append((datum, study))
    return results


def riemann_flux_trace_report(x=0.5, T=1.0, n_cells=2000):
    """
    Burgers with the datum -1 | +1: w0 = u0**2 is constant, yet the flux
    trace at x varies as the rarefaction passes.

    Returns:
        tuple[TVReport, float]: Trace report at x and the variation of w0.
    """
    problem = FluxTraceProblem(burgers(), StepFunction([0.0], [-1.0, 1.0]), (-2.0, 2.0), T)
    study = verify_flux_trace_tv(problem, [x], [4.0 / n_cells])
    tv_w0 = problem.datum.map(np.square).total_variation()
    return study.reports[(x, 4.0 / n_cells)], tv_w0


# Network experiments


def _space_time_l1(times, a, b, dx):
    weights = np.diff(times)
    return float(np.sum(np.abs(a[:-1] - b[:-1]).sum(axis=1) * weights) * dx)


def _field_distances(base, other):
    rho = sum(
        _space_time_l1(base.times, base.roads[r].states, other.roads[r].states, base.roads[r].grid.dx)
        for r in base.roads
    )
    mass = sum(
        _space_time_l1(base.times, base.theta[key].mass, other.theta[key].mass, base.theta[key].grid.dx)
        for key in base.theta
    )
    return rho, mass


def _pair_average(values, factor):
    return values.reshape(values.shape[:-1] + (-1, factor)).mean(axis=-1)


def refine_network(net, factor):
    roads = [Road(r.id, r.length, r.n_cells * factor) for r in net.roads.values()]
    return Network(roads, list(net.junctions.values()), list(net.paths.values()))


def self_error(net, model, data, T, options, factor=2, coarse=None):
    """
    L1 distance (space-time, density and masses) between a run and the same
    run on a grid ``factor`` times finer, averaged back to the coarse cells.
    """
    if coarse is None:
        coarse = solve_network(net, model, data, T, options)
    fine = solve_network(refine_network(net, factor), model, data, T, options)
    rho, mass = 0.0, 0.0
    weights = np.diff(coarse.times)
    for road, sol in coarse.roads.items():
        idx = [fine.roads[road].level_index(t) for t in coarse.times[:-1]]
        averaged = _pair_average(fine.roads[road].states[idx], factor)
        rho += float(np.sum(np.abs(sol.states[:-1] - averaged).sum(axis=1) * weights) * sol.grid.dx)
    for key, sol in coarse.theta.items():
        idx = [fine.theta[key].level_index(t) for t in coarse.times[:-1]]
        averaged = _pair_average(fine.theta[key].mass[idx], factor)
        mass += float(np.sum(np.abs(sol.mass[:-1] - averaged).sum(axis=1) * weights) * sol.grid.dx)
    return rho, mass


def perturb_theta_in(data, raised, lowered, delta, window):
    """Moves ``delta`` of the boundary fraction from path ``lowered`` to ``raised`` on ``window``."""
    bump = StepFunction(list(window), [0.0, delta, 0.0])
    theta_in = dict(data.theta_in)
    theta_in[raised] = theta_in[raised] + bump
    theta_in[lowered] = theta_in[lowered] + bump.scaled(-1.0)
    return replace(data, theta_in=theta_in)


@dataclass(frozen=True)
class StabilityTable:
    """
    Distances of perturbed runs from the base run, one per bump height.

    Distances at or below ``DISTANCE_FLOOR`` are rounding noise: they neither
    break monotonicity nor enter the ratios.
    """

    deltas: tuple
    rho_distances: tuple
    mass_distances: tuple
    self_error: tuple
    reference: object = field(default=None, repr=False, compare=False)

    def _pairs(self):
        for series in (self.rho_distances, self.mass_distances):
            yield from zip(series[:-1], series[1:])

    def monotone(self):
        return all(b < a or max(a, b) <= DISTANCE_FLOOR for a, b in self._pairs())

    def ratios(self):
        return [a / b if b > 0 else math.inf for a, b in self._pairs() if a > DISTANCE_FLOOR]

    def perturbs_density(self):
        """Whether the largest bump moved the densities at all, i.e. crossed a junction."""
        return bool(self.rho_distances) and self.rho_distances[0] > DISTANCE_FLOOR

    def below_self_error(self, factor=3.0):
        return (
            self.rho_distances[-1] <= factor * self.self_error[0]
            and self.mass_distances[-1] <= factor * self.self_error[1]
        )

    def rows(self):
        return list(zip(self.deltas, self.rho_distances, self.mass_distances))


def stability_experiment(net, model, data, T, options, raised, lowered, window, deltas, threads=1):
    """
    Distances from the base run for perturbations of the boundary fractions.

    Args:
        net (Network): The network.
        model (FluxModel): The flux.
        data (NetworkData): Base data.
        T (float): Final time.
        options (SolveOptions): Numerical options.
        raised (str): Path whose boundary fraction is raised.
        lowered (str): Path whose boundary fraction is lowered by the same amount.
        window (tuple[float, float]): Time window of the bump.
        deltas (list[float]): Bump heights.
        threads (int): Worker threads for the perturbed runs.

    Returns:
        StabilityTable: Space-time L1 distances of densities and masses.
    """
    base = solve_network(net, model, data, T, options)

    def distance(delta):
        perturbed = perturb_theta_in(data, raised, lowered, delta, window)
        return _field_distances(base, solve_network(net, model, perturbed, T, options))

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        distances = list(pool.map(distance, deltas))
    table = StabilityTable(
        deltas=tuple(deltas),
        rho_distances=tuple(d[0] for d in distances),
        mass_distances=tuple(d[1] for d in distances),
        self_error=self_error(net, model, data, T, options, coarse=base),
        reference=base,
    )
    log.info("stability: distances %s, self error %s", table.rho_distances, table.self_error)
    return table


def _level_tv(states):
    return np.abs(np.diff(states, axis=-1)).sum(axis=-1)


def _theta_tv(theta_view):
    out = np.empty(theta_view.shape[0])
    for k, row in enumerate(theta_view):
        kept = row[~np.isnan(row)]
        out[k] = np.sum(np.abs(np.diff(kept))) if kept.size > 1 else 0.0
    return out


@dataclass(frozen=True)
class BVTable:
    """Largest spatial variation over time per field and refinement factor."""

    factors: tuple
    rho: dict
    theta: dict
    source_bound: float
    source_tv: dict
    reference: object = field(default=None, repr=False, compare=False)

    def ratio(self):
        worst = 0.0
        for table in (self.rho, self.theta):
            for key, values in table.items():
                for a, b in zip(values[:-1], values[1:]):
                    worst = max(worst, b / max(a, TV_FLOOR))
        return worst

    def uniformly_bounded(self, ratio=BV_RATIO):
        return self.ratio() <= ratio

    def source_bound_holds(self):
        return all(tv <= self.source_bound + BV_SLACK for tv in self.source_tv.values())

    def rows(self):
        rows = []
        for i, factor in enumerate(self.factors):
            rows.extend(("rho", road, "", factor, v[i]) for road, v in sorted(self.rho.items()))
            rows.extend(
                ("theta", road, path, factor, v[i]) for (path, road), v in sorted(self.theta.items())
            )
        return rows


def bv_propagation_experiment(net, model, data, T, options, factors=(1, 2), threads=1):
    """
    Spatial variation of every density and fraction, maximized over time, on
    successive refinements of the network grids.

    Returns:
        BVTable: The table with the source-road bound.
    """

    def run(factor):
        return solve_network(refine_network(net, factor), model, data, T, options)

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        solutions = list(pool.map(run, factors))

    rho = {road: [] for road in net.roads}
    theta = {key: [] for key in solutions[0].theta}
    source = net.source_roads[0]
    source_tv = {}
    for factor, sol in zip(factors, solutions):
        for road, drive in sol.roads.items():
            rho[road].append(float(np.max(_level_tv(drive.states))))
        for key, transport in sol.theta.items():
            theta[key].append(float(np.max(_theta_tv(transport.theta_view))))
        source_tv[factor] = rho[source][-1]

    initial = data.rho0[source].restricted(0.0, net.roads[source].length)
    inflow = data.rho_in.restricted(0.0, T)
    bound = (
        initial.total_variation()
        + inflow.total_variation()
        + abs(float(initial(0.0)) - float(inflow(0.0)))
    )
    finest = solutions[int(np.argmax(factors))]
    table = BVTable(tuple(factors), rho, theta, bound, source_tv, reference=finest)
    log.info("bv propagation: refinement ratio %.4g, source bound %.6g", table.ratio(), bound)
    return table


# Front tracking against the Godunov scheme


CROSS_VALIDATION_FIXTURES = {
    "shock": StepFunction([0.0], [1.0, 0.0]),
    "rarefaction": StepFunction([0.0], [0.0, 1.0]),
    "interaction": StepFunction([0.0, 0.5], [1.0, 0.0, 1.0]),
}


def cross_validate(fixture, level=5, dx=1e-3, T=1.0, domain=(-1.0, 3.0)):
    """
    L1 distance at time T between the exact front-tracking solution for the
    Burgers lattice flux and the Godunov scheme run with the same flux.

    Args:
        fixture (str): ``shock``, ``rarefaction`` or ``interaction``.
        level (int): Lattice index of the flux.
        dx (float): Cell size of the scheme.
        T (float): Final time.
        domain (tuple): Interval compared; fronts must not reach its ends.

    Returns:
        float: The distance.
    """
    if fixture not in CROSS_VALIDATION_FIXTURES:
        raise ValidationError(f"unknown cross-validation fixture {fixture!r}")
    datum = CROSS_VALIDATION_FIXTURES[fixture]
    flux = piecewise_linearize(burgers(), level, 0.0, 1.0)
    exact = evolve(datum, flux, T)
    grid = Grid(domain[0], domain[1], int(round((domain[1] - domain[0]) / dx)))
    run = godunov_evolve(datum, flux, grid, T)
    reference = grid.averages(sample_space_profile(exact, T))
    distance = float(np.sum(np.abs(run.states[-1] - reference)) * grid.dx)
    log.info("cross-validation %s at dx=%g: L1 distance %.6g", fixture, dx, distance)
    return distance
