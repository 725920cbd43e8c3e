"""Tests for wave front tracking with a lattice flux."""

import os
import sys
import unittest

sys.path.append(os.path.join(os.path.dirname(__file__), ".."))

import numpy as np  # noqa: E402

from libs.errors import UnsupportedRegimeError, ValidationError  # noqa: E402
from libs.flux import burgers, lwr_linear, piecewise_linearize  # noqa: E402
from libs.front_tracking import (  # noqa: E402
    evolve,
    quantize_datum,
    quantize_value,
    sample_space_profile,
    sample_time_trace,
    solve_ibvp_ft,
    solve_riemann_pl,
)
from libs.profiles import StepFunction  # noqa: E402


class TestRiemann(unittest.TestCase):
    """Test suite for the lattice Riemann solver."""

    def setUp(self):
        self.flux = piecewise_linearize(burgers(), 1, -1.0, 1.0)

    def test_rarefaction_fan(self):
        """-1 | 1 opens into one front per lattice segment."""
        fan = solve_riemann_pl(-1.0, 1.0, self.flux)
        np.testing.assert_allclose([f.speed for f in fan], [-1.5, -0.5, 0.5, 1.5])
        self.assertEqual([f.left for f in fan], [-1.0, -0.5, 0.0, 0.5])

    def test_single_shock(self):
        """1 | -1 is one stationary shock."""
        fan = solve_riemann_pl(1.0, -1.0, self.flux)
        self.assertEqual(len(fan), 1)
        self.assertEqual(fan[0].speed, 0.0)

    def test_equal_states(self):
        """No fronts between equal states."""
        self.assertEqual(solve_riemann_pl(0.5, 0.5, self.flux), [])

    def test_quantize(self):
        """Values round to the nearest lattice point, ties toward zero."""
        self.assertEqual(float(quantize_value(0.3, 2)), 0.25)
        self.assertEqual(float(quantize_value(0.125, 2)), 0.0)
        self.assertEqual(float(quantize_value(-0.375, 2)), -0.25)

    def test_quantize_datum(self):
        """Data land on the lattice and pieces that round alike merge."""
        datum = quantize_datum(StepFunction([0.0, 1.0], [0.3, 0.26, 0.9]), 2)
        np.testing.assert_array_equal(datum.breakpoints, [1.0])
        np.testing.assert_array_equal(datum.values, [0.25, 1.0])

        sampled = quantize_datum(([0.0, 1.0, 2.0], [0.1, 0.12, 0.6]), 3)
        np.testing.assert_array_equal(sampled.breakpoints, [1.5])
        np.testing.assert_array_equal(sampled.values, [0.125, 0.625])


class TestEvolve(unittest.TestCase):
    """Test suite for the Cauchy solver."""

    def setUp(self):
        self.flux = piecewise_linearize(burgers(), 1, 0.0, 1.0)

    def test_shock_meets_rarefaction(self):
        """1 | 0 | 1: the shock hits the slow rarefaction front at t = 2, x = 2."""
        sol = evolve(StepFunction([0.0, 1.0], [1.0, 0.0, 1.0]), self.flux, 3.0)
        self.assertEqual(len(sol.collisions), 1)
        t, x = sol.collisions[0]
        self.assertAlmostEqual(t, 2.0, places=12)
        self.assertAlmostEqual(x, 2.0, places=12)
        self.assertEqual(sol.front_counts()[0], 3)
        self.assertEqual(sol.front_counts()[-1], 2)

    def test_two_shocks_merge(self):
        """1 | 0.5 | 0: shocks of speed 1.5 and 0.5 merge at (1, 1.5) into one of speed 1."""
        sol = evolve(StepFunction([0.0, 1.0], [1.0, 0.5, 0.0]), self.flux, 2.0)
        t, x = sol.collisions[0]
        self.assertAlmostEqual(t, 1.0, places=12)
        self.assertAlmostEqual(x, 1.5, places=12)
        final = sol.slice_at(2.0)
        self.assertEqual(len(final.fronts), 1)
        self.assertAlmostEqual(final.fronts[0].speed, 1.0)
        profile = sample_space_profile(sol, 2.0)
        self.assertEqual(profile(2.4), 1.0)
        self.assertEqual(profile(2.6), 0.0)

    def test_conserved_integral(self):
        """The exact solution conserves the integral away from the tails."""
        sol = evolve(StepFunction([0.0, 1.0], [1.0, 0.5, 0.0]), self.flux, 2.0)
        before = sample_space_profile(sol, 0.0).integral(-10.0, 10.0)
        after = sample_space_profile(sol, 2.0).integral(-10.0, 10.0)
        # inflow through x = -10 at rate f(1) = 1 over two time units
        self.assertAlmostEqual(after - before, 2.0, places=12)

    def test_time_trace(self):
        """The trace at x = 0.75 drops 0 -> 1 when the merged shock passes."""
        sol = evolve(StepFunction([0.0], [1.0, 0.0]), self.flux, 2.0)
        trace = sample_time_trace(sol, 0.75)
        np.testing.assert_allclose(trace.plus.times, [0.0, 0.75])
        np.testing.assert_allclose(trace.plus.values, [0.0, 1.0])
        self.assertAlmostEqual(trace.total_variation(), 1.0)
        self.assertFalse(trace.nudged)

    def test_time_outside_horizon(self):
        """Profiles are only available on [0, T]."""
        sol = evolve(StepFunction([0.0], [1.0, 0.0]), self.flux, 1.0)
        with self.assertRaises(ValidationError):
            sample_space_profile(sol, 2.0)


class TestIbvp(unittest.TestCase):
    """Test suite for the initial-boundary value solver."""

    def setUp(self):
        self.flux = piecewise_linearize(lwr_linear(), 2, 0.0, 0.5)

    def test_filling_an_empty_road(self):
        """Inflow 0.25 into an empty road enters with speed 0.75 and exits at t = 4/3."""
        sol = solve_ibvp_ft(
            StepFunction.constant(0.0), StepFunction.constant(0.25), self.flux, (0.0, 1.0), 2.0
        )
        first = sol.slices[0].fronts[0]
        self.assertAlmostEqual(first.speed, 0.75)
        exit_trace = sol.boundary_trace("beta-")
        np.testing.assert_allclose(exit_trace.times, [0.0, 4.0 / 3.0])
        np.testing.assert_allclose(exit_trace.values, [0.0, 0.25])

        trace = sample_time_trace(sol, 0.5)
        np.testing.assert_allclose(trace.minus.times, [0.0, 2.0 / 3.0])
        np.testing.assert_allclose(trace.minus.values, [0.0, 0.25])

    def test_entry_trace(self):
        """The alpha+ trace follows the inflow datum."""
        inflow = StepFunction([0.5], [0.25, 0.5])
        sol = solve_ibvp_ft(StepFunction.constant(0.25), inflow, self.flux, (0.0, 1.0), 1.0)
        entry = sol.boundary_trace("alpha+")
        self.assertEqual(entry.value_at(0.25), 0.25)
        self.assertEqual(entry.value_at(0.75), 0.5)

    def test_negative_slopes_rejected(self):
        """Data above the critical density would send fans out of the domain."""
        flux = piecewise_linearize(lwr_linear(), 2, 0.0, 1.0)
        with self.assertRaises(UnsupportedRegimeError):
            solve_ibvp_ft(
                StepFunction.constant(0.75), StepFunction.constant(0.0), flux, (0.0, 1.0), 1.0
            )

    def test_trace_position_inside(self):
        """Trace positions must lie strictly inside the domain."""
        sol = solve_ibvp_ft(
            StepFunction.constant(0.0), StepFunction.constant(0.25), self.flux, (0.0, 1.0), 1.0
        )
        with self.assertRaises(ValidationError):
            sample_time_trace(sol, 1.0)


if __name__ == "__main__":
    unittest.main()
