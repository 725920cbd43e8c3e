"""
Scenario runner: validates a scenario document, dispatches the requested
mode and writes its artifacts.

Exit statuses: 0 success, 2 validation error, 3 model-regime error,
4 internal error. Every failure is also printed to stderr as one
``error kind=.. code=.. message=".."`` record.
"""

import logging
import sys

import numpy as np

from .artifacts import CsvStore
from .config import apply_overrides, get_config, load_scenario, numerics_setting
from .counterexample import CounterexampleSpec, tv_blowup_report, tv_growth
from .diagnostics import (
    CROSS_VALIDATION_FIXTURES,
    FluxTraceProblem,
    bv_propagation_experiment,
    cross_validate,
    random_flux_trace_check,
    riemann_flux_trace_report,
    stability_experiment,
    verify_flux_trace_tv,
    wft_ibvp_check,
    wft_trace_check,
)
from .errors import FluxModelError, LwrNetError, ValidationError
from .flux import burgers, lwr_linear, model_from_config, piecewise_linearize
from .front_tracking import evolve
from .network import (
    Network,
    NetworkData,
    SolveOptions,
    max_junction_residual,
    max_sum_to_one_residual,
    solve_network,
    validate,
    validate_data,
)
from .profiles import StepFunction

log = logging.getLogger(__name__)

MODES = ("simulate", "counterexample", "verify-tv", "stability", "bv-propagation", "convergence", "validate")
NETWORK_MODES = ("simulate", "stability", "bv-propagation")

# Largest admissible front tracking / Godunov distance at the finest resolution.
CROSS_VALIDATION_TOLERANCE = 5e-2

DEFAULT_OUTPUT_DIR = "out"


def _final_time(scenario):
    return scenario.get("numerics", {}).get("T")


def _references(net, data):
    diagnostics = []
    for road in data.get("rho0", {}):
        if road not in net.roads:
            diagnostics.append(f"data.rho0 references unknown road {road}")
    for path, roads in data.get("theta0", {}).items():
        if path not in net.paths:
            diagnostics.append(f"data.theta0 references unknown path {path}")
            continue
        for road in roads:
            if road not in net.paths[path].roads:
                diagnostics.append(f"data.theta0.{path} references road {road} not on the path")
    for path in data.get("theta_in", {}):
        if path not in net.paths:
            diagnostics.append(f"data.theta_in references unknown path {path}")
    return diagnostics


def validate_config(scenario, mode=None):
    """
    Schema, reference and constraint checks for a scenario.

    Args:
        scenario (dict): The scenario document (overrides applied).
        mode (str, optional): Mode to check for; defaults to ``scenario["mode"]``.

    Returns:
        list[str]: Diagnostics, empty when the scenario can run.
    """
    mode = mode or scenario.get("mode", "simulate")
    if mode == "validate":
        mode = scenario.get("mode", "simulate")
        mode = "simulate" if mode == "validate" else mode
    if mode not in MODES:
        return [f"unknown mode {mode!r}; expected one of {', '.join(MODES)}"]
    if mode not in NETWORK_MODES:
        return []

    diagnostics = []
    T = _final_time(scenario)
    if not isinstance(T, (int, float)) or isinstance(T, bool) or not T > 0:
        diagnostics.append(f"numerics.T must be a positive number, got {T!r}")
    if "network" not in scenario:
        return diagnostics + ["missing section: network"]

    try:
        model = model_from_config(scenario.get("flux"))
    except FluxModelError as e:
        return diagnostics + [f"flux: {e.message}"]
    try:
        net = Network.from_config(scenario["network"])
    except ValidationError as e:
        return diagnostics + [e.message]
    problems = validate(net)
    if problems:
        return diagnostics + problems

    data_spec = scenario.get("data", {})
    references = _references(net, data_spec)
    if references:
        return diagnostics + references
    try:
        data = NetworkData.from_config(net, data_spec)
    except ValidationError as e:
        return diagnostics + [e.message]
    if not diagnostics:
        tolerance = numerics_setting(scenario, None, "sum_to_one_tolerance")
        diagnostics.extend(validate_data(net, model, data, float(T), tolerance))
    return diagnostics


def _solve_options(scenario, runtime, threads):
    def setting(name):
        return numerics_setting(scenario, runtime, name)

    return SolveOptions(
        cfl=float(setting("cfl")),
        dt=scenario.get("numerics", {}).get("dt"),
        vacuum_rule=setting("vacuum_rule"),
        vacuum_ratio=float(setting("vacuum_eps_ratio")),
        demand_tolerance=float(setting("demand_tolerance")),
        flux_clamp_tolerance=float(setting("flux_clamp_tolerance")),
        sum_to_one_tolerance=float(setting("sum_to_one_tolerance")),
        threads=threads,
    )


def _network_problem(scenario, runtime, threads):
    model = model_from_config(scenario.get("flux"))
    net = Network.from_config(scenario["network"])
    data = NetworkData.from_config(net, scenario.get("data", {}))
    T = float(_final_time(scenario))
    return net, model, data, T, _solve_options(scenario, runtime, threads)


def _residuals(sol):
    return {
        "max_junction_residual": max_junction_residual(sol),
        "max_sum_to_one_residual": max_sum_to_one_residual(sol),
        "mass_balance_error": sol.mass_balance_error(),
    }


def run_simulate(scenario, runtime, store, threads=1, **_):
    net, model, data, T, options = _network_problem(scenario, runtime, threads)
    sol = solve_network(net, model, data, T, options)
    output_times = scenario.get("numerics", {}).get("output_times") or [0.0, T]

    for road in sorted(sol.roads):
        store.write_table(f"road_{road}", ["t", "x", "rho"], sol.roads[road].rows(output_times))
        store.write_table(
            f"traces_{road}", ["t", "flux_alpha", "flux_beta"], sol.roads[road].trace_rows()
        )
    for path, road in sorted(sol.theta):
        store.write_table(
            f"theta_{path}_{road}",
            ["t", "x", "rho", "m", "theta"],
            sol.theta[(path, road)].rows(output_times),
        )
    store.write_table(
        "junction_audit",
        ["t", "junction", "road", "path", "q", "demand", "rho_bar", "theta_bar"],
        sol.audit_rows(),
    )

    max_density = sol.max_density()
    free_regime = max_density <= model.rho_star + 1e-12 and sol.min_density() >= -1e-12
    if not free_regime:
        log.warning("density left the free regime: max %.17g > %.17g", max_density, model.rho_star)
    return {
        "roads": len(net.roads),
        "paths": len(net.paths),
        "junctions": len(net.junctions),
        "steps": sol.times.size - 1,
        "T": T,
        "rho_star": model.rho_star,
        "max_density": max_density,
        "free_regime": free_regime,
        "clamp_events": sol.clamp_events,
        **_residuals(sol),
    }


def run_counterexample(scenario, runtime, store, blocks=None, **_):
    cfg = scenario.get("counterexample", {})
    spec = CounterexampleSpec(int(blocks or cfg.get("n_blocks", 6)))
    report = tv_blowup_report(
        spec, samples=int(cfg.get("samples", 4000)), fv_cells=int(cfg.get("fv_cells", 0))
    )
    header = ["label", "x", "resolution", "total", "positive", "negative"]
    rows = [report.u_trace.row(), report.w_trace.row()]
    if report.numerical is not None:
        rows.append(report.numerical.row())
    store.write_table("tv_report", header, rows)
    store.write_table(
        "sigma_samples",
        ["n", "t", "u"],
        zip(spec.indices, report.sigma_times, report.sigma_values),
    )
    store.write_table("trace_x0", ["t", "u", "w"], report.rows())
    counts, bounds, slope = tv_growth(spec.n_blocks)
    store.write_table("tv_growth", ["n_blocks", "tv_lower_bound"], zip(counts, bounds))
    return {**report.summary(), "tv_growth_slope": slope}


def _trace_flux(name):
    if name == "burgers":
        return burgers()
    if name == "lwr_linear":
        return lwr_linear()
    raise ValidationError(f"verify_tv.flux must be burgers or lwr_linear, got {name!r}")


def run_verify_tv(scenario, runtime, store, threads=1, **_):
    cfg = scenario.get("verify_tv", {})
    datum = StepFunction.from_config(
        cfg.get("datum", {"breakpoints": [0.0, 0.5], "values": [1.0, 0.0, 1.0]}), "verify_tv.datum"
    )
    problem = FluxTraceProblem(
        _trace_flux(cfg.get("flux", "burgers")),
        datum,
        tuple(cfg.get("domain", [-2.0, 3.0])),
        float(cfg.get("T", 1.0)),
    )
    positions = cfg.get("positions", [0.25, 0.75, 1.25])
    resolutions = cfg.get("resolutions", [4e-3, 2e-3, 1e-3])
    study = verify_flux_trace_tv(problem, positions, resolutions, threads)
    header = ["label", "x", "resolution", "total", "positive", "negative"]
    store.write_table("flux_trace_tv", header, study.rows())

    riemann, tv_w0 = riemann_flux_trace_report()
    store.write_table("riemann_trace", header, [riemann.row()])

    rng = np.random.default_rng(int(cfg.get("seed", 0)))
    wft = wft_trace_check(rng, int(cfg.get("wft_data", 50)), int(cfg.get("wft_positions", 20)))
    ibvp = wft_ibvp_check(rng, int(cfg.get("ibvp_problems", 20)))
    store.write_table("wft_traces", ["level", "x", "tv_trace", "tv_datum"], wft)
    store.write_table("wft_ibvp", ["x", "tv_trace", "bound"], ibvp)

    random = random_flux_trace_check(
        rng,
        int(cfg.get("random_data", 10)),
        int(cfg.get("random_positions", 10)),
        resolutions,
        threads=threads,
    )
    store.write_table(
        "random_flux_traces",
        ["datum"] + header,
        [(i,) + row for i, (_, random_study) in enumerate(random) for row in random_study.rows()],
    )
    random_spreads = [s.spread(x) for _, s in random for x in s.positions]

    return {
        "flux_trace_bounded": study.bounded(),
        "max_flux_trace_spread": max(study.spread(x) for x in positions),
        "random_flux_traces_bounded": all(s.bounded() for _, s in random),
        "max_random_flux_trace_spread": max(random_spreads, default=0.0),
        "riemann_tv_w": riemann.total,
        "riemann_tv_w0": tv_w0,
        "wft_traces": len(wft),
        "wft_violations": sum(1 for _, _, tv, bound in wft if tv > bound),
        "ibvp_traces": len(ibvp),
        "ibvp_violations": sum(1 for _, tv, bound in ibvp if tv > bound),
    }


def run_stability(scenario, runtime, store, threads=1, **_):
    net, model, data, T, options = _network_problem(scenario, runtime, threads)
    cfg = scenario.get("stability", {})
    paths = sorted(net.paths)
    deltas = cfg.get("deltas") or [0.1 * 2.0**-m for m in range(4)]
    table = stability_experiment(
        net,
        model,
        data,
        T,
        options,
        raised=cfg.get("raised", paths[0]),
        lowered=cfg.get("lowered", paths[-1]),
        window=tuple(cfg.get("window", [0.25 * T, 0.5 * T])),
        deltas=deltas,
        threads=threads,
    )
    store.write_table("stability", ["delta", "rho_distance", "mass_distance"], table.rows())
    return {
        "monotone": table.monotone(),
        "min_ratio": min(table.ratios(), default=float("nan")),
        "rho_self_error": table.self_error[0],
        "mass_self_error": table.self_error[1],
        "final_rho_distance": table.rho_distances[-1],
        "final_mass_distance": table.mass_distances[-1],
        "rho_perturbed": table.perturbs_density(),
        "below_self_error": table.below_self_error(),
        **_residuals(table.reference),
    }


def run_bv_propagation(scenario, runtime, store, threads=1, **_):
    net, model, data, T, options = _network_problem(scenario, runtime, threads)
    factors = tuple(scenario.get("bv_propagation", {}).get("factors", [1, 2]))
    table = bv_propagation_experiment(net, model, data, T, options, factors, threads)
    store.write_table("bv_propagation", ["field", "road", "path", "factor", "max_tv"], table.rows())
    return {
        "refinement_ratio": table.ratio(),
        "uniformly_bounded": table.uniformly_bounded(),
        "source_bound": table.source_bound,
        "source_bound_holds": table.source_bound_holds(),
        **_residuals(table.reference),
    }


def run_convergence(scenario, runtime, store, threads=1, **_):
    cfg = scenario.get("convergence", {})
    fixtures = cfg.get("fixtures", sorted(CROSS_VALIDATION_FIXTURES))
    level = int(cfg.get("level", 5))
    resolutions = cfg.get("resolutions", [4e-3, 2e-3, 1e-3])
    T = float(cfg.get("T", 1.0))

    rows = [
        (fixture, dx, cross_validate(fixture, level=level, dx=dx, T=T))
        for fixture in fixtures
        for dx in resolutions
    ]
    store.write_table("cross_validation", ["fixture", "dx", "l1_distance"], rows)

    flux = piecewise_linearize(burgers(), level, 0.0, 1.0)
    exact = evolve(CROSS_VALIDATION_FIXTURES[fixtures[0]], flux, T)
    store.write_table("wft_events", ["t", "x", "left", "right", "speed"], exact.event_rows())
    xs = np.linspace(-1.0, 3.0, 401)
    store.write_table("wft_profile", ["t", "x", "u"], exact.profile_rows([0.0, 0.5 * T, T], xs))

    finest = min(resolutions)
    worst = max(d for _, dx, d in rows if dx == finest)
    return {
        "level": level,
        "finest_dx": finest,
        "max_distance_finest": worst,
        "within_tolerance": worst <= CROSS_VALIDATION_TOLERANCE,
    }


def run_validate(scenario, runtime, store, **_):
    return {"status": "ok"}


HANDLERS = {
    "simulate": run_simulate,
    "counterexample": run_counterexample,
    "verify-tv": run_verify_tv,
    "stability": run_stability,
    "bv-propagation": run_bv_propagation,
    "convergence": run_convergence,
    "validate": run_validate,
}


def run(config_path, overrides=None, mode=None, out_dir=None, threads=None, blocks=None, runtime=None):
    """
    Runs a scenario and writes its artifacts.

    Args:
        config_path (str): Scenario file.
        overrides (list[str], optional): ``key=value`` overrides.
        mode (str, optional): Mode; defaults to the scenario's ``mode``.
        out_dir (str, optional): Output directory; defaults to ``output.dir``.
        threads (int, optional): Worker threads; defaults to the ``threads`` setting.
        blocks (int, optional): Counterexample blocks, overriding the scenario.
        runtime (dict, optional): Runtime config; loaded with ``get_config`` when omitted.

    Returns:
        int: The exit status.
    """
    try:
        runtime = get_config() if runtime is None else runtime
        scenario = apply_overrides(load_scenario(config_path), overrides)
        mode = mode or scenario.get("mode", "simulate")
        diagnostics = validate_config(scenario, mode)
        if diagnostics:
            raise ValidationError("; ".join(diagnostics), diagnostics=diagnostics)

        out_dir = out_dir or scenario.get("output", {}).get("dir") or runtime.get(
            "output.dir", DEFAULT_OUTPUT_DIR
        )
        threads = int(threads or runtime.get("threads", 1))
        log.info("running %s from %s into %s", mode, config_path, out_dir)
        with CsvStore(out_dir, digits=int(runtime.get("csv.digits", 17))) as store:
            summary = HANDLERS[mode](scenario, runtime, store, threads=threads, blocks=blocks)
            summary = {"mode": mode, **summary}
            store.write_summary(summary)
        return 0
    except LwrNetError as e:
        log.error("%s failed: %s", mode or "run", e.message)
        print(e.record(), file=sys.stderr)
        return e.exit_code
    except Exception as e:  # pylint: disable=broad-except
        log.exception("internal error")
        print(LwrNetError(f"{type(e).__name__}: {e}").record(), file=sys.stderr)
        return LwrNetError.exit_code
