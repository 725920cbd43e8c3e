"""
Road networks made of T-junctions (one incoming road, one or more outgoing
roads) traversed by paths that all start on the same source road.

The solve is inductive in topological order: a road's density and the
fractions of every path through it are computed over the whole horizon, then
the downstream junction turns the per-path outflows of that road into the
boundary data of each outgoing road:

    demand        = sum of q_k over the paths continuing on the road
    rho_bar       = free-branch inverse of the flux at that demand
    theta_k at d+ = q_k / g(rho_bar)   (0 when g(rho_bar) = 0)

All roads share one time axis, built from the smallest cell and the largest
free-regime speed, so junction data are exchanged step by step.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .errors import CongestionError, NetworkError, ValidationError
from .flux import FLUX_CLAMP_TOLERANCE, invert_flux_free
from .godunov import DEFAULT_CFL, SPEED_FLOOR, Grid, GridRecorder, check_free_regime, godunov_step
from .profiles import StepFunction
from .theta import VACUUM_RATIO, solve_theta
from .traces import TraceSeries

log = logging.getLogger(__name__)

# Demand may exceed q_max by this much before the junction is declared congested.
DEMAND_TOLERANCE = 1e-10

# Data fractions must sum to one within this tolerance.
SUM_TO_ONE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Road:
    id: str
    length: float
    n_cells: int
    upstream: str = None
    downstream: str = None

    @property
    def grid(self):
        return Grid(0.0, float(self.length), int(self.n_cells))


@dataclass(frozen=True)
class Junction:
    id: str
    incoming: tuple
    outgoing: tuple


@dataclass(frozen=True)
class Path:
    id: str
    roads: tuple


class Network:
    """
    Topology of roads, junctions and paths.

    Args:
        roads (list[Road]): Roads; their upstream/downstream junctions are
            filled in from ``junctions``.
        junctions (list[Junction]): Junctions.
        paths (list[Path]): Paths as ordered road lists.
    """

    def __init__(self, roads, junctions, paths):
        self.junctions = {j.id: j for j in junctions}
        self.paths = {p.id: p for p in paths}
        self.problems = []

        upstream, downstream = {}, {}
        for junction in junctions:
            for road in junction.incoming:
                if road in downstream:
                    self.problems.append(f"road {road} enters several junctions")
                downstream[road] = junction.id
            for road in junction.outgoing:
                if road in upstream:
                    self.problems.append(f"road {road} leaves several junctions")
                upstream[road] = junction.id

        self.roads = {
            r.id: Road(r.id, r.length, r.n_cells, upstream.get(r.id), downstream.get(r.id))
            for r in roads
        }
        if len(self.roads) != len(roads):
            self.problems.append("duplicate road ids")
        if len(self.paths) != len(paths):
            self.problems.append("duplicate path ids")
        if len(self.junctions) != len(junctions):
            self.problems.append("duplicate junction ids")

    @classmethod
    def from_config(cls, spec):
        """
        Builds a network from a scenario's ``network`` table.

        Args:
            spec (dict): ``roads`` (id, length, cells), ``junctions`` (id, in,
                out) and ``paths`` (id, roads).

        Returns:
            Network: The network, not yet validated.
        """
        if not spec:
            raise ValidationError("scenario has no network section")
        try:
            roads = [
                Road(str(r["id"]), float(r.get("length", 1.0)), int(r.get("cells", 100)))
                for r in spec.get("roads", [])
            ]
            junctions = [
                Junction(str(j["id"]), tuple(map(str, j["in"])), tuple(map(str, j["out"])))
                for j in spec.get("junctions", [])
            ]
            paths = [Path(str(p["id"]), tuple(map(str, p["roads"]))) for p in spec.get("paths", [])]
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError(f"malformed network section: {e}") from e
        return cls(roads, junctions, paths)

    def graph(self):
        """Road-to-road graph: an edge for every incoming/outgoing pair of a junction."""
        graph = nx.DiGraph()
        graph.add_nodes_from(self.roads)
        for junction in self.junctions.values():
            for a in junction.incoming:
                for b in junction.outgoing:
                    graph.add_edge(a, b, junction=junction.id)
        return graph

    def paths_through(self, road_id):
        return [p.id for p in self.paths.values() if road_id in p.roads]

    @property
    def source_roads(self):
        return [r.id for r in self.roads.values() if r.upstream is None]

    @property
    def destination_roads(self):
        return [r.id for r in self.roads.values() if r.downstream is None]

    def generations(self):
        """Roads grouped by topological depth, each group sorted by id."""
        return [sorted(g) for g in nx.topological_generations(self.graph())]

    def road_order(self):
        return list(nx.lexicographical_topological_sort(self.graph()))

    def check(self):
        problems = validate(self)
        if problems:
            raise NetworkError("; ".join(problems), diagnostics=problems)


def validate(net):
    """
    Topology violations of a network, empty when it is valid.

    Checks: every junction has exactly one incoming road and at least one
    outgoing road, referenced roads exist, the road graph is acyclic, there
    is a single source road where every path starts, consecutive path roads
    meet at a junction, paths end at destinations, every road is on a path,
    and the paths on an outgoing road are among those on the incoming road.

    Args:
        net (Network): The network.

    Returns:
        list[str]: Violations.
    """
    problems = list(net.problems)

    for junction in net.junctions.values():
        if len(junction.incoming) != 1:
            problems.append(
                f"non-T junction {junction.id}: {len(junction.incoming)} incoming roads"
            )
        if not junction.outgoing:
            problems.append(f"junction {junction.id} has no outgoing road")
        for road in junction.incoming + junction.outgoing:
            if road not in net.roads:
                problems.append(f"junction {junction.id} references unknown road {road}")
    if problems:
        return problems

    graph = net.graph()
    if not nx.is_directed_acyclic_graph(graph):
        problems.append("road network contains a cycle")

    sources = net.source_roads
    if len(sources) != 1:
        problems.append(f"expected exactly one source road, found {sorted(sources)}")
    if not net.paths:
        problems.append("network has no paths")

    for path in net.paths.values():
        if not path.roads:
            problems.append(f"path {path.id} is empty")
            continue
        unknown = [r for r in path.roads if r not in net.roads]
        if unknown:
            problems.append(f"path {path.id} references unknown roads {unknown}")
            continue
        if len(set(path.roads)) != len(path.roads):
            problems.append(f"path {path.id} visits a road twice")
        if len(sources) == 1 and path.roads[0] != sources[0]:
            problems.append(f"path {path.id} does not start at the common source road {sources[0]}")
        for a, b in zip(path.roads[:-1], path.roads[1:]):
            junction = net.roads[a].downstream
            if junction is None or b not in net.junctions[junction].outgoing:
                problems.append(f"path {path.id}: roads {a} and {b} are not consecutive")
        if net.roads[path.roads[-1]].downstream is not None:
            problems.append(f"path {path.id} does not end at a destination")

    covered = {r for p in net.paths.values() for r in p.roads}
    for road in net.roads:
        if road not in covered:
            problems.append(f"road {road} is not on any path")
    if len(sources) == 1:
        unreachable = set(net.roads) - nx.descendants(graph, sources[0]) - {sources[0]}
        for road in sorted(unreachable):
            problems.append(f"road {road} is not reachable from the source")

    for junction in net.junctions.values():
        upstream = set(net.paths_through(junction.incoming[0]))
        for road in junction.outgoing:
            extra = set(net.paths_through(road)) - upstream
            if extra:
                problems.append(
                    f"paths {sorted(extra)} use road {road} without coming through {junction.id}"
                )
    return problems


@dataclass(frozen=True)
class NetworkData:
    """Initial densities and fractions, and the source boundary data."""

    rho0: dict
    theta0: dict
    rho_in: StepFunction
    theta_in: dict

    @classmethod
    def from_config(cls, net, spec):
        """
        Builds the data from a scenario's ``data`` table.

        Missing densities are 0. Missing fractions of a road split the road
        equally among its paths when no path of that road is given, and are 0
        otherwise; the same rule applies to the source fractions.

        Args:
            net (Network): The (valid) network.
            spec (dict): ``rho0``, ``theta0``, ``rho_in``, ``theta_in``.

        Returns:
            NetworkData: The data.
        """
        spec = spec or {}
        rho0 = {
            road: StepFunction.from_config(spec.get("rho0", {}).get(road, 0.0), f"rho0.{road}")
            for road in net.roads
        }

        theta0_spec = spec.get("theta0", {})
        theta0 = {}
        for road in net.roads:
            paths = net.paths_through(road)
            given = {p: theta0_spec[p][road] for p in paths if road in theta0_spec.get(p, {})}
            for path in paths:
                if given:
                    value = given.get(path, 0.0)
                else:
                    value = 1.0 / len(paths)
                theta0[(path, road)] = StepFunction.from_config(value, f"theta0.{path}.{road}")

        theta_in_spec = spec.get("theta_in", {})
        theta_in = {}
        for path in net.paths:
            value = theta_in_spec.get(path, 0.0) if theta_in_spec else 1.0 / len(net.paths)
            theta_in[path] = StepFunction.from_config(value, f"theta_in.{path}")

        rho_in = StepFunction.from_config(spec.get("rho_in", 0.0), "rho_in")
        return cls(rho0, theta0, rho_in, theta_in)


def _max_sum_defect(profiles, weight, lo, hi):
    points = [lo, hi]
    for profile in list(profiles) + [weight]:
        points.extend(p for p in profile.breakpoints if lo < p < hi)
    points = np.unique(points)
    mids = 0.5 * (points[1:] + points[:-1])
    total = np.sum([p(mids) for p in profiles], axis=0)
    occupied = weight(mids) > 0
    if not np.any(occupied):
        return 0.0
    return float(np.max(np.abs(total - 1.0)[occupied]))


def validate_data(net, model, data, T, tolerance=SUM_TO_ONE_TOLERANCE):
    """
    Diagnostics for network data: free-regime ranges, fractions in [0, 1],
    and fractions summing to one wherever there is traffic.

    Returns:
        list[str]: Diagnostics, empty when the data are admissible.
    """
    diagnostics = []
    for label, profile in [(f"rho0.{r}", data.rho0[r]) for r in net.roads] + [
        ("rho_in", data.rho_in.restricted(0.0, T))
    ]:
        try:
            check_free_regime(model, profile, label)
        except ValidationError as e:
            diagnostics.append(f"free-regime bound violated: {e.message}")

    for key, profile in list(data.theta0.items()) + list(data.theta_in.items()):
        low, high = profile.range()
        if low < 0 or high > 1:
            diagnostics.append(f"fraction {key} outside [0, 1]: [{low}, {high}]")

    for road in net.roads:
        profiles = [data.theta0[(p, road)] for p in net.paths_through(road)]
        defect = _max_sum_defect(profiles, data.rho0[road], 0.0, net.roads[road].length)
        if defect > tolerance:
            diagnostics.append(
                f"sum-to-one violated for initial fractions on road {road}: off by {defect:.3g}"
            )
    defect = _max_sum_defect(list(data.theta_in.values()), data.rho_in, 0.0, T)
    if defect > tolerance:
        diagnostics.append(f"sum-to-one violated for boundary fractions: off by {defect:.3g}")
    return diagnostics


@dataclass
class SolveOptions:
    cfl: float = DEFAULT_CFL
    dt: float = None
    vacuum_rule: str = "upwind"
    vacuum_ratio: float = VACUUM_RATIO
    demand_tolerance: float = DEMAND_TOLERANCE
    flux_clamp_tolerance: float = FLUX_CLAMP_TOLERANCE
    sum_to_one_tolerance: float = SUM_TO_ONE_TOLERANCE
    threads: int = 1
    # junction_hook(junction, road, step, rho_bar, thetas) -> (rho_bar, thetas)
    junction_hook: object = None


@dataclass(frozen=True)
class NetworkSolution:
    network: Network
    model: object
    times: np.ndarray
    roads: dict
    theta: dict
    boundary_density: dict
    boundary_theta: dict
    demand: dict
    audit: tuple = ()
    clamp_events: int = 0
    options: SolveOptions = field(default_factory=SolveOptions)

    @property
    def end_time(self):
        return float(self.times[-1])

    def path_mass_sum(self, road):
        return np.sum([self.theta[(p, road)].mass for p in self.network.paths_through(road)], axis=0)

    def max_density(self):
        return max(float(np.max(sol.states)) for sol in self.roads.values())

    def min_density(self):
        return min(float(np.min(sol.states)) for sol in self.roads.values())

    def total_mass(self):
        return np.sum([sol.mass() for sol in self.roads.values()], axis=0)

    def mass_balance_error(self):
        """
        Relative defect of: mass(T) + destination outflow - source inflow - mass(0).
        """
        totals = self.total_mass()
        inflow = sum(self.roads[r].left_flux_trace.integral() for r in self.network.source_roads)
        outflow = sum(
            self.roads[r].right_flux_trace.integral() for r in self.network.destination_roads
        )
        defect = totals[-1] + outflow - inflow - totals[0]
        scale = max(totals[0] + inflow, 1e-300)
        return float(abs(defect) / scale) if totals[0] + inflow > 0 else float(abs(defect))

    def glued_theta(self, path_id, t):
        """
        theta of one path along its whole route at time t.

        Returns:
            tuple[np.ndarray, np.ndarray]: Path coordinates of the cell
            centers and theta (NaN on vacuum), road after road.
        """
        xs, thetas, offset = [], [], 0.0
        for road in self.network.paths[path_id].roads:
            sol = self.theta[(path_id, road)]
            k = sol.level_index(t)
            xs.append(sol.grid.centers + offset)
            thetas.append(sol.theta_view[k])
            offset += self.network.roads[road].length
        return np.concatenate(xs), np.concatenate(thetas)

    def audit_rows(self):
        return list(self.audit)


def _run_density(grid, model, u0, times, ghosts):
    recorder = GridRecorder(grid, model, u0, times[0])
    dx = grid.dx
    for n in range(times.size - 1):
        u = recorder.state
        u_new, fluxes = godunov_step(u, ghosts[n], u[-1], model, times[n + 1] - times[n], dx)
        recorder.append(times[n + 1] - times[n], fluxes, u_new, time=times[n + 1])
    return recorder.build()


def _time_series(times, values):
    return StepFunction(times[1:-1], values)


class _Inverter:
    """Free-branch inverse with a cache for repeated demands."""

    def __init__(self, model, tolerance):
        self.model = model
        self.tolerance = tolerance
        self.cache = {}

    def __call__(self, q):
        if q not in self.cache:
            self.cache[q] = invert_flux_free(self.model, q, self.tolerance)
        return self.cache[q]


def _assemble_junction(junction, road, net, model, times, theta_sols, options, inverter):
    """Boundary data of the roads leaving ``junction``, fed by ``road``."""
    steps = times.size - 1
    results, audit, clamps = {}, [], 0
    for out in junction.outgoing:
        paths = net.paths_through(out)
        q = {p: theta_sols[(p, road)].fluxes[:, -1] for p in paths}
        demand = np.sum([q[p] for p in paths], axis=0) if paths else np.zeros(steps)

        worst = int(np.argmax(demand)) if steps else 0
        if steps and demand[worst] > model.q_max + options.demand_tolerance:
            raise CongestionError(
                f"junction {junction.id}: demand {demand[worst]:.17g} for road {out} at "
                f"t={times[worst]:.17g} exceeds capacity {model.q_max:.17g}"
            )

        rho_bar = np.empty(steps)
        thetas = {p: np.empty(steps) for p in paths}
        for n in range(steps):
            rho = inverter(float(demand[n]))
            capacity = float(model.g(rho))
            ratios = {}
            for p in paths:
                ratio = float(q[p][n]) / capacity if capacity > 0 else 0.0
                if ratio < 0.0 or ratio > 1.0:
                    clamps += 1
                    log.debug(
                        "junction %s: theta of %s on %s clamped from %.17g at step %d",
                        junction.id,
                        p,
                        out,
                        ratio,
                        n,
                    )
                    ratio = min(max(ratio, 0.0), 1.0)
                ratios[p] = ratio
            if options.junction_hook is not None:
                rho, ratios = options.junction_hook(junction.id, out, n, rho, dict(ratios))
            rho_bar[n] = rho
            for p in paths:
                thetas[p][n] = ratios[p]
                audit.append((times[n], junction.id, out, p, q[p][n], demand[n], rho, ratios[p]))
        results[out] = (rho_bar, thetas, demand)
    return results, audit, clamps


def solve_network(net, model, data, T, options=None):
    """
    Densities and path fractions on every road of a T-junction network.

    Args:
        net (Network): The network.
        model (FluxModel): The traffic flux.
        data (NetworkData): Initial and source boundary data in the free regime.
        T (float): Final time.
        options (SolveOptions, optional): Numerical options.

    Returns:
        NetworkSolution: Per-road density runs, per-(path, road) transports and
        the junction audit.
    """
    options = options or SolveOptions()
    if not T > 0:
        raise ValidationError(f"final time must be positive, got {T}")
    net.check()
    diagnostics = validate_data(net, model, data, T, options.sum_to_one_tolerance)
    if diagnostics:
        raise ValidationError("; ".join(diagnostics), diagnostics=diagnostics)

    if options.dt is not None:
        dt = float(options.dt)
    else:
        g_speed, v_speed = model.max_speed()
        dx_min = min(r.grid.dx for r in net.roads.values())
        dt = options.cfl * dx_min / max(g_speed, v_speed, SPEED_FLOOR)
    steps = max(1, math.ceil(T / dt - 1e-9))
    times = np.minimum(np.arange(steps + 1) * dt, T)
    times[-1] = T
    log.info(
        "network solve: %d roads, %d paths, %d steps of %.6g up to T=%g",
        len(net.roads),
        len(net.paths),
        steps,
        dt,
        T,
    )

    inverter = _Inverter(model, options.flux_clamp_tolerance)
    source = net.source_roads[0]
    boundary_density = {source: np.array([float(data.rho_in(t)) for t in times[:-1]])}
    boundary_theta = {
        (p, source): np.array([float(data.theta_in[p](t)) for t in times[:-1]])
        for p in net.paths_through(source)
    }
    demand = {}
    roads, theta, audit = {}, {}, []
    clamps = 0

    def solve_road(road_id):
        road = net.roads[road_id]
        grid = road.grid
        drive = _run_density(
            grid, model, grid.averages(data.rho0[road_id]), times, boundary_density[road_id]
        )
        fractions = {}
        for path in net.paths_through(road_id):
            fractions[(path, road_id)] = solve_theta(
                drive,
                data.theta0[(path, road_id)],
                _time_series(times, boundary_theta[(path, road_id)]),
                vacuum_rule=options.vacuum_rule,
                vacuum_ratio=options.vacuum_ratio,
                grid=grid,
            )
        junction_data = ({}, [], 0)
        if road.downstream is not None:
            junction_data = _assemble_junction(
                net.junctions[road.downstream], road_id, net, model, times, fractions, options, inverter
            )
        return road_id, drive, fractions, junction_data

    workers = max(1, int(options.threads))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for generation in net.generations():
            for road_id, drive, fractions, (outgoing, rows, count) in pool.map(solve_road, generation):
                roads[road_id] = drive
                theta.update(fractions)
                audit.extend(rows)
                clamps += count
                for out, (rho_bar, thetas, assembled) in outgoing.items():
                    boundary_density[out] = rho_bar
                    demand[out] = assembled
                    for path, values in thetas.items():
                        boundary_theta[(path, out)] = values

    if clamps:
        log.warning("theta boundary ratios clamped %d time(s)", clamps)

    return NetworkSolution(
        network=net,
        model=model,
        times=times,
        roads=roads,
        theta=theta,
        boundary_density=boundary_density,
        boundary_theta=boundary_theta,
        demand=demand,
        audit=tuple(audit),
        clamp_events=clamps,
        options=options,
    )


@dataclass(frozen=True)
class JunctionResidual:
    """
    Per outgoing road of a junction, over time:

    ``demand``  |sum of incoming path outflows - flux entering the road|
    ``patched`` |sum of path fluxes entering the road - flux entering the road|
    ``gluing``  max over paths of |path flux entering the road - its incoming outflow|
    """

    junction: str
    times: np.ndarray
    demand: dict
    patched: dict
    gluing: dict
    end_time: float

    def series(self, road):
        values = np.maximum.reduce([self.demand[road], self.patched[road], self.gluing[road]])
        return TraceSeries(self.times, values, self.end_time, kind="flow", side="d+")

    def max(self):
        values = [np.max(v, initial=0.0) for d in (self.demand, self.patched, self.gluing) for v in d.values()]
        return float(max(values, default=0.0))


def junction_flux_residual(sol, junction_id):
    """
    Residuals of the junction coupling at every step.

    Args:
        sol (NetworkSolution): A solved network.
        junction_id (str): The junction.

    Returns:
        JunctionResidual: Residual series per outgoing road.
    """
    net = sol.network
    junction = net.junctions[junction_id]
    incoming = junction.incoming[0]
    times = sol.times[:-1]
    demand, patched, gluing = {}, {}, {}
    for out in junction.outgoing:
        entering = sol.roads[out].fluxes[:, 0]
        paths = net.paths_through(out)
        outflows = [sol.theta[(p, incoming)].fluxes[:, -1] for p in paths]
        inflows = [sol.theta[(p, out)].fluxes[:, 0] for p in paths]
        zero = np.zeros_like(entering)
        demand[out] = np.abs(np.sum(outflows, axis=0) - entering) if paths else np.abs(entering)
        patched[out] = np.abs(np.sum(inflows, axis=0) - entering) if paths else np.abs(entering)
        gluing[out] = (
            np.max([np.abs(a - b) for a, b in zip(inflows, outflows)], axis=0) if paths else zero
        )
    return JunctionResidual(junction_id, times, demand, patched, gluing, sol.end_time)


def max_junction_residual(sol):
    return max((junction_flux_residual(sol, j).max() for j in sol.network.junctions), default=0.0)


def sum_to_one_residual(sol, road):
    """
    Cellwise sum of the path masses minus the density on a road, at every
    level; 0 on vacuum cells where both sides vanish.

    Returns:
        np.ndarray: Array of shape (levels, cells).
    """
    rho = sol.roads[road].states
    residual = sol.path_mass_sum(road) - rho
    eps = sol.options.vacuum_ratio * sol.model.rho_max
    return np.where(rho > eps, residual, 0.0)


def max_sum_to_one_residual(sol):
    return max(float(np.max(np.abs(sum_to_one_residual(sol, r)))) for r in sol.network.roads)
