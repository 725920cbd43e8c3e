"""Tests for the closed-form Burgers construction with an unbounded trace variation."""

import os
import sys
import unittest

sys.path.append(os.path.join(os.path.dirname(__file__), ".."))

import numpy as np  # noqa: E402

from libs.counterexample import (  # noqa: E402
    W_TV_BOUND,
    CounterexampleSpec,
    check_monotone_feet,
    counterexample_exact_u,
    counterexample_initial_datum,
    fan_clearance,
    gamma_curve,
    gamma_hat,
    gamma_hat_prime,
    rankine_hugoniot_residual,
    tv_blowup_report,
    tv_growth,
)
from libs.errors import ConsistencyError, ValidationError  # noqa: E402


class TestShockCurve(unittest.TestCase):
    """Test suite for the shock curve gamma."""

    def setUp(self):
        self.spec = CounterexampleSpec(6)

    def test_constants(self):
        """Blocks n = 3..8 with eps_n = 2**-(n+1) starting at 1/8 - 2**-n."""
        np.testing.assert_array_equal(self.spec.indices, [3, 4, 5, 6, 7, 8])
        self.assertEqual(self.spec.epsilons[0], 1.0 / 16.0)
        self.assertEqual(self.spec.starts[0], 0.0)
        self.assertEqual(self.spec.starts[1], 0.0625)
        self.assertEqual(self.spec.horizon, 0.125 - 2.0**-9)
        self.assertEqual(self.spec.sample_times[0], 0.03125)

    def test_mid_block_value(self):
        """gamma(sigma_3) = -3/4096."""
        position, _ = gamma_curve(self.spec, self.spec.sample_times[0])
        self.assertAlmostEqual(position, -3.0 / 4096.0, places=15)

    def test_vanishes_at_block_ends(self):
        """Every block starts and ends on x = 0."""
        positions, _ = gamma_curve(self.spec, self.spec.starts)
        np.testing.assert_allclose(positions, 0.0, atol=1e-15)
        final, _ = gamma_curve(self.spec, self.spec.horizon, closed=True)
        self.assertAlmostEqual(final, 0.0, places=15)

    def test_c1_patching(self):
        """Slopes match across block boundaries."""
        spec = self.spec
        for k in range(1, spec.n_blocks):
            eps_before, eps_after = spec.epsilons[k - 1], spec.epsilons[k]
            before = spec.signs[k - 1] * gamma_hat_prime(eps_before, eps_before)
            after = spec.signs[k] * gamma_hat_prime(eps_after, 0.0)
            self.assertAlmostEqual(before, after, places=15)
            self.assertAlmostEqual(gamma_hat(eps_before, eps_before), 0.0, places=15)

    def test_time_range(self):
        """The open curve excludes the horizon."""
        with self.assertRaises(ValidationError):
            gamma_curve(self.spec, self.spec.horizon)
        with self.assertRaises(ValidationError):
            gamma_curve(self.spec, -0.01)
        with self.assertRaises(ValidationError):
            CounterexampleSpec(0)

    def test_feet_decrease(self):
        """Characteristics reaching the shock later start further left."""
        self.assertLess(check_monotone_feet(self.spec, points=2000), 0.0)
        self.assertGreater(self.spec.r, 0.0)


class TestExactSolution(unittest.TestCase):
    """Test suite for the exact state and the initial datum."""

    def setUp(self):
        self.spec = CounterexampleSpec(4)

    def test_alternating_states_at_zero(self):
        """At mid-block times x = 0 is right of the shock for odd n and left of it for even n."""
        values = [counterexample_exact_u(self.spec, t, 0.0) for t in self.spec.sample_times]
        self.assertEqual(values[0], -1.0)
        self.assertEqual(values[2], -1.0)
        self.assertGreater(values[1], 0.9)
        self.assertGreater(values[3], 0.9)

    def test_far_field(self):
        """-1 far right, 0 far left."""
        self.assertEqual(counterexample_exact_u(self.spec, 0.05, 1.0), -1.0)
        self.assertEqual(counterexample_exact_u(self.spec, 0.05, -self.spec.r - 1.0), 0.0)

    def test_rankine_hugoniot(self):
        """The shock speed matches the jump condition for u**2."""
        self.assertLess(rankine_hugoniot_residual(self.spec, samples=50), 1e-6)

    def test_fan_stays_left(self):
        """The rarefaction fan never reaches x = 0 before the horizon."""
        times = np.linspace(0.0, self.spec.horizon, 100, endpoint=False)
        self.assertLess(fan_clearance(self.spec, times), 0.0)
        with self.assertRaises(ConsistencyError):
            fan_clearance(self.spec, [self.spec.horizon])

    def test_initial_datum(self):
        """The datum is 0 | 1 + gamma' | -1 with bounded variation."""
        datum = counterexample_initial_datum(self.spec, points=401)
        self.assertEqual(datum(0.5), -1.0)
        self.assertEqual(datum(-datum.r - 0.1), 0.0)
        self.assertAlmostEqual(datum(datum.xs[200]), datum.values[200], places=9)
        self.assertLessEqual(datum.total_variation(), self.spec.tv_bound)
        self.assertLessEqual(datum.total_variation(), 5.125)
        self.assertGreater(datum.total_variation(), 2.5)


class TestBlowupReport(unittest.TestCase):
    """Test suite for tv_blowup_report."""

    def test_lower_bound_grows(self):
        """Each extra block adds about 2 to the variation of u(., 0)."""
        bounds = [tv_blowup_report(CounterexampleSpec(n), samples=100).tv_lower_bound for n in (2, 4)]
        self.assertGreater(bounds[0], 1.8)
        self.assertGreater(bounds[1], 3 * 1.8)
        self.assertGreater(bounds[1] - bounds[0], 3.6)

    def test_eight_blocks(self):
        """With 8 blocks TV u(., 0) >= 3 and grows by at least 0.45 per block; u0 and w stay bounded."""
        report = tv_blowup_report(CounterexampleSpec(8), samples=100)
        self.assertGreaterEqual(report.tv_lower_bound, 3.0)
        self.assertLessEqual(report.tv_u0, 5.13)
        self.assertLessEqual(report.w_trace.total, W_TV_BOUND)
        self.assertLessEqual(report.rh_residual, 1e-6)

        counts, bounds, slope = tv_growth(8)
        self.assertEqual(counts, list(range(1, 9)))
        self.assertAlmostEqual(bounds[-1], report.tv_lower_bound, places=12)
        self.assertGreaterEqual(slope, 0.45)
        self.assertTrue(np.all(np.diff(bounds) >= 0.45))

    def test_report(self):
        """u(., 0) varies a lot, w(., 0) = u**2 and u0 stay bounded."""
        report = tv_blowup_report(CounterexampleSpec(4), samples=200, fv_cells=400)
        self.assertGreaterEqual(report.u_trace.total, report.tv_lower_bound - 1e-12)
        self.assertLessEqual(report.w_trace.total, W_TV_BOUND)
        self.assertLessEqual(report.tv_u0, report.tv_u0_bound)
        self.assertLess(report.rh_residual, 1e-6)
        self.assertTrue(report.u_trace.consistent())
        self.assertIsNotNone(report.numerical)
        summary = report.summary()
        self.assertEqual(summary["n_blocks"], 4)
        self.assertIn("tv_u_x0_numerical", summary)
        self.assertEqual(len(report.rows()), report.u_trace.times.size)

    def test_single_block(self):
        """One block has a single mid-block sample and no lower bound."""
        report = tv_blowup_report(CounterexampleSpec(1), samples=50)
        self.assertEqual(report.tv_lower_bound, 0.0)


if __name__ == "__main__":
    unittest.main()
