"""Tests for the total-variation analytics and the solver experiments."""

import os
import sys
import unittest

sys.path.append(os.path.join(os.path.dirname(__file__), ".."))

import numpy as np  # noqa: E402

from libs.config import load_scenario  # noqa: E402
from libs.diagnostics import (  # noqa: E402
    DISTANCE_FLOOR,
    RANDOM_TRACE_FLOOR,
    REFINEMENT_SPREAD,
    FluxTraceProblem,
    StabilityTable,
    bv_propagation_experiment,
    cross_validate,
    draw_positions,
    perturb_theta_in,
    random_flux_trace_check,
    random_step_datum,
    riemann_flux_trace_report,
    rough_positions,
    stability_experiment,
    total_variation,
    tv_report,
    verify_flux_trace_tv,
    wft_ibvp_check,
    wft_trace_check,
)
from libs.errors import ConsistencyError, ValidationError  # noqa: E402
from libs.flux import burgers, lwr_linear  # noqa: E402
from libs.godunov import Grid  # noqa: E402
from libs.network import Network, NetworkData, SolveOptions  # noqa: E402
from libs.profiles import StepFunction  # noqa: E402

SCENARIOS = os.path.join(os.path.dirname(__file__), "..", "scenarios")


def scenario(name):
    return load_scenario(os.path.join(SCENARIOS, name))


def network_problem(name, cells, data=None):
    document = scenario(name)
    for road in document["network"]["roads"]:
        road["cells"] = cells
    net = Network.from_config(document["network"])
    return net, NetworkData.from_config(net, data or document["data"])


class TestTotalVariation(unittest.TestCase):
    """Test suite for total_variation and TVReport."""

    def test_examples(self):
        """TV of sampled sequences."""
        self.assertEqual(total_variation([1, 3, 2]), 3.0)
        self.assertEqual(total_variation([0, 1, 0, 1, 0]), 4.0)
        self.assertEqual(total_variation([5]), 0.0)
        with self.assertRaises(ValidationError):
            total_variation([])

    def test_report_split(self):
        """The variation splits into its positive and negative parts."""
        report = tv_report([0.0, 1.0, 2.0], [1.0, 3.0, 2.0], 0.5, resolution=0.1, label="u")
        self.assertEqual((report.total, report.positive, report.negative), (3.0, 2.0, 1.0))
        self.assertTrue(report.consistent())
        self.assertEqual(report.row(), ("u", 0.5, 0.1, 3.0, 2.0, 1.0))

    def test_random_datum(self):
        """Random data stay in range and on the lattice."""
        rng = np.random.default_rng(3)
        datum = random_step_datum(rng, 5, 0.0, 0.5, (0.0, 1.0), tv_max=1.0, level=4)
        low, high = datum.range()
        self.assertGreaterEqual(low, 0.0)
        self.assertLessEqual(high, 0.5)
        np.testing.assert_array_equal(datum.values * 16, np.round(datum.values * 16))


class TestFrontTrackingBounds(unittest.TestCase):
    """Test suite for the exact trace variation checks."""

    def test_cauchy_traces(self):
        """On 50 data and 20 positions each the trace variation never exceeds the datum's, exactly."""
        rows = wft_trace_check(np.random.default_rng(5))
        self.assertEqual(len(rows), 50 * 20)
        self.assertEqual({level for level, _, _, _ in rows}, {4, 6})
        for level, x, tv_trace, tv_datum in rows:
            self.assertLessEqual(tv_datum, 4.0)
            self.assertLessEqual(tv_trace, tv_datum, msg=f"level {level}, x={x}")

    def test_boundary_value_traces(self):
        """Traces of boundary value problems stay below the data bound."""
        rows = wft_ibvp_check(np.random.default_rng(9), n_problems=4, n_positions=4)
        self.assertEqual(len(rows), 4 * 5)
        for _, tv_trace, bound in rows:
            self.assertLessEqual(tv_trace, bound + 1e-12)


class TestFluxTraces(unittest.TestCase):
    """Test suite for the finite-volume flux trace studies."""

    def test_shock_trace_is_stable(self):
        """The flux trace of a passing shock varies by f(1) - f(0) = 1 at every resolution."""
        problem = FluxTraceProblem(burgers(), StepFunction([0.0], [1.0, 0.0]), (-1.0, 2.0), 1.0)
        study = verify_flux_trace_tv(problem, [0.5], [8e-3, 4e-3, 2e-3], threads=2)
        np.testing.assert_allclose(study.variations(0.5), 1.0, atol=0.05)
        self.assertTrue(study.bounded())
        self.assertEqual(len(study.rows()), 3)

    def test_random_flux_traces(self):
        """Burgers with 10 random data: flux-trace variation at 10 positions each moves by at most 10% under refinement."""
        results = random_flux_trace_check(np.random.default_rng(11), threads=3)
        self.assertEqual(len(results), 10)
        for datum, study in results:
            self.assertLessEqual(datum.total_variation(), 4.0 + 1e-12)
            self.assertEqual(len(study.positions), 10)
            self.assertEqual(study.resolutions, (4e-3, 2e-3, 1e-3))
            for x in study.positions:
                self.assertGreaterEqual(np.min(np.abs(datum.breakpoints - x)), 3e-2)
                self.assertLessEqual(study.spread(x), REFINEMENT_SPREAD, msg=f"x={x}")
            self.assertEqual(study.floor, RANDOM_TRACE_FLOOR)
            self.assertTrue(study.bounded())

    def test_position_draw(self):
        """Positions too close to an avoided point are redrawn."""
        rng = np.random.default_rng(0)
        xs, nudged = draw_positions(rng, 50, (0.0, 1.0), [0.25, 0.5, 0.75], 0.1)
        self.assertEqual(len(xs), 50)
        for x in xs:
            self.assertGreaterEqual(min(abs(x - 0.25), abs(x - 0.5), abs(x - 0.75)), 0.1)
        self.assertGreater(nudged, 0)
        with self.assertRaises(ConsistencyError):
            draw_positions(rng, 1, (0.0, 1.0), [0.5], 1.0)

    def test_rough_positions(self):
        """Kinks and jumps are rough; linear ramps and plateaus are not."""
        grid = Grid(0.0, 1.0, 10)
        state = np.array([0.0, 0.1, 0.2, 0.3, 0.3, 0.3, 0.8, 0.8, 0.8, 0.8])
        np.testing.assert_allclose(rough_positions(grid, state), [0.35, 0.55, 0.65])
        self.assertEqual(rough_positions(grid, np.linspace(0.0, 1.0, 10)).size, 0)

    def test_riemann_trace(self):
        """-1 | 1: w0 is constant while w(., 0.5) drops from 1 to 1/16."""
        report, tv_w0 = riemann_flux_trace_report(n_cells=400)
        self.assertEqual(tv_w0, 0.0)
        self.assertAlmostEqual(report.total, 0.9375, delta=0.05)

    def test_cross_validation(self):
        """Front tracking and the Godunov scheme agree on the same lattice flux."""
        for fixture in ("shock", "rarefaction", "interaction"):
            self.assertLess(cross_validate(fixture, level=5, dx=2e-3), 5e-2)
        with self.assertRaises(ValidationError):
            cross_validate("contact")


class TestNetworkExperiments(unittest.TestCase):
    """Test suite for the stability and BV experiments on networks."""

    def setUp(self):
        self.model = lwr_linear()

    def test_perturbation_keeps_sum(self):
        """Moving delta between two paths keeps the boundary fractions summing to one."""
        _, data = network_problem("two_junction_chain.json", 10)
        perturbed = perturb_theta_in(data, "P1", "P3", 0.1, (0.25, 0.5))
        total = sum(perturbed.theta_in[p](0.3) for p in perturbed.theta_in)
        self.assertAlmostEqual(total, 1.0, places=12)
        self.assertAlmostEqual(perturbed.theta_in["P1"](0.3), 0.4, places=12)
        self.assertAlmostEqual(perturbed.theta_in["P1"](0.6), 0.5, places=12)

    def test_stability(self):
        """Halving the perturbation at least reduces the distances by 1.5, down to the scheme's own error."""
        net, data = network_problem("stability.json", 20)
        settings = scenario("stability.json")["stability"]
        table = stability_experiment(
            net,
            self.model,
            data,
            2.5,
            SolveOptions(),
            raised=settings["raised"],
            lowered=settings["lowered"],
            window=tuple(settings["window"]),
            deltas=settings["deltas"],
            threads=2,
        )
        self.assertTrue(table.perturbs_density())
        self.assertTrue(table.monotone())
        self.assertEqual(len(table.ratios()), 6)
        self.assertGreaterEqual(min(table.ratios()), 1.5)
        self.assertTrue(table.below_self_error())
        self.assertEqual(len(table.rows()), 4)
        self.assertIsNotNone(table.reference)

    def test_noise_floor(self):
        """Distances at rounding level neither break monotonicity nor enter the ratios."""
        noise = StabilityTable((0.1, 0.05), (DISTANCE_FLOOR / 2, DISTANCE_FLOOR), (0.2, 0.1), (1.0, 1.0))
        self.assertTrue(noise.monotone())
        self.assertEqual(noise.ratios(), [2.0])
        self.assertFalse(noise.perturbs_density())
        growing = StabilityTable((0.1, 0.05), (0.1, 0.2), (0.2, 0.1), (1.0, 1.0))
        self.assertFalse(growing.monotone())
        self.assertTrue(growing.perturbs_density())

    def test_zero_perturbation(self):
        """No perturbation, no distance."""
        net, data = network_problem("two_junction_chain.json", 10)
        table = stability_experiment(
            net, self.model, data, 0.5, SolveOptions(), "P1", "P3", (0.1, 0.2), [0.0]
        )
        self.assertEqual(table.rho_distances, (0.0,))
        self.assertEqual(table.mass_distances, (0.0,))

    def test_bv_constant_state(self):
        """A steady state has no spatial variation at any resolution."""
        data = {
            "rho0": {"I1": 0.2, "I2": 0.2},
            "theta0": {"P1": {"I1": 0.6, "I2": 0.6}, "P2": {"I1": 0.4, "I2": 0.4}},
            "rho_in": 0.2,
            "theta_in": {"P1": 0.6, "P2": 0.4},
        }
        net, data = network_problem("identity_junction.json", 10, data)
        table = bv_propagation_experiment(net, self.model, data, 1.0, SolveOptions(), (1, 2))
        for values in list(table.rho.values()) + list(table.theta.values()):
            self.assertLess(max(values), 1e-9)
        self.assertTrue(table.uniformly_bounded())
        self.assertEqual(table.source_bound, 0.0)

    def test_bv_source_bound(self):
        """The source road variation stays below TV(rho0) + TV(rho_in) + the corner jump."""
        net, data = network_problem("two_junction_chain.json", 20)
        table = bv_propagation_experiment(net, self.model, data, 1.0, SolveOptions(), (1, 2), threads=2)
        self.assertAlmostEqual(table.source_bound, 0.55, places=12)
        self.assertTrue(table.source_bound_holds())
        self.assertEqual(len(table.rows()), 2 * (len(net.roads) + len(table.theta)))

    def test_bv_two_junctions(self):
        """Variation behind two junctions does not grow when the grids are halved."""
        net, data = network_problem("bv_propagation.json", 100)
        table = bv_propagation_experiment(net, self.model, data, 4.0, SolveOptions(), (1, 2), threads=2)
        self.assertTrue(table.uniformly_bounded(), msg=f"ratio={table.ratio()}")
        self.assertTrue(table.source_bound_holds())
        self.assertAlmostEqual(table.source_bound, 0.1, places=12)
        self.assertGreater(max(table.rho["I4"]), 0.02)
        self.assertIsNotNone(table.reference)


if __name__ == "__main__":
    unittest.main()
