"""Tests for the Godunov finite-volume engine."""

import os
import sys
import unittest

sys.path.append(os.path.join(os.path.dirname(__file__), ".."))

import numpy as np  # noqa: E402

from libs.errors import FreeRegimeError, ValidationError  # noqa: E402
from libs.flux import burgers, lwr_linear  # noqa: E402
from libs.godunov import (  # noqa: E402
    Grid,
    cfl_dt,
    godunov_evolve,
    godunov_flux,
    solve_ibvp_fv,
    transport_dt,
)
from libs.profiles import StepFunction  # noqa: E402


class TestGodunovFlux(unittest.TestCase):
    """Test suite for the numerical flux and the time step."""

    def setUp(self):
        self.model = lwr_linear()

    def test_transonic_rarefaction(self):
        """0.8 | 0.2 spans the maximum, so the flux is q_max."""
        self.assertAlmostEqual(godunov_flux(0.8, 0.2, self.model), 0.25)

    def test_shock(self):
        """0.2 | 0.8 takes the smaller end flux."""
        self.assertAlmostEqual(godunov_flux(0.2, 0.8, self.model), 0.16)

    def test_burgers_minimum(self):
        """For u**2, -1 | 1 gives the minimum 0 and 1 | -1 the maximum 1."""
        self.assertEqual(godunov_flux(-1.0, 1.0, burgers()), 0.0)
        self.assertEqual(godunov_flux(1.0, -1.0, burgers()), 1.0)

    def test_vectorized(self):
        """Arrays go in, arrays come out."""
        out = godunov_flux(np.array([0.8, 0.2]), np.array([0.2, 0.8]), self.model)
        np.testing.assert_allclose(out, [0.25, 0.16])

    def test_cfl_dt(self):
        """|g'(0)| = 1 limits the step to cfl * dx."""
        self.assertAlmostEqual(cfl_dt([0.0, 0.2], self.model, 0.5, 0.01), 0.005)
        self.assertAlmostEqual(cfl_dt([0.0, 0.2], self.model, 0.5, 0.01, cap=0.001), 0.001)
        with self.assertRaises(ValidationError):
            cfl_dt([0.0], self.model, 1.5, 0.01)

    def test_transport_dt(self):
        """v(0.5) = 0.5 bounds the step where g' vanishes."""
        self.assertAlmostEqual(transport_dt([0.5], self.model, 0.5, 0.01), 0.01)
        self.assertAlmostEqual(transport_dt([0.0, 0.5], self.model, 0.5, 0.01), 0.005)


class TestGodunovEvolve(unittest.TestCase):
    """Test suite for godunov_evolve and the road solver."""

    def setUp(self):
        self.model = lwr_linear()

    def test_shock_position(self):
        """0.1 | 0.4 moves at (g(0.4) - g(0.1)) / 0.3 = 0.5."""
        grid = Grid(-1.0, 2.0, 300)
        sol = godunov_evolve(StepFunction([0.0], [0.1, 0.4]), self.model, grid, 1.0)
        self.assertAlmostEqual(sol.end_time, 1.0)
        state = sol.states[-1]
        crossing = grid.centers[int(np.argmax(state > 0.25))]
        self.assertLess(abs(crossing - 0.5), 3 * grid.dx)

    def test_conservation(self):
        """Mass changes only through the boundary fluxes."""
        grid = Grid(0.0, 1.0, 100)
        sol = godunov_evolve(StepFunction([0.3, 0.6], [0.1, 0.45, 0.2]), self.model, grid, 0.5)
        self.assertLess(sol.conservation_residual(), 1e-13)

    def test_l1_contraction(self):
        """Two runs with the same fixed step get no further apart in L1."""
        grid = Grid(0.0, 4.0, 200)
        u0 = StepFunction([1.0, 2.0], [0.2, 0.4, 0.2])
        v0 = StepFunction([1.5, 2.5], [0.2, 0.1, 0.2])
        u = godunov_evolve(u0, self.model, grid, 0.5, dt=0.005)
        v = godunov_evolve(v0, self.model, grid, 0.5, dt=0.005)
        before = np.sum(np.abs(u.states[0] - v.states[0])) * grid.dx
        after = np.sum(np.abs(u.states[-1] - v.states[-1])) * grid.dx
        self.assertLessEqual(after, before + 1e-12)

    def test_ibvp_stays_free(self):
        """Free-regime data stay in [0, rho_star] and fill the road from the inflow."""
        grid = Grid(0.0, 1.0, 100)
        sol = solve_ibvp_fv(0.0, 0.2, self.model, grid, 3.0)
        self.assertLessEqual(float(np.max(sol.states)), 0.5)
        self.assertGreaterEqual(float(np.min(sol.states)), 0.0)
        np.testing.assert_allclose(sol.states[-1], 0.2, atol=1e-8)
        np.testing.assert_allclose(sol.left_flux_trace.values[-1], 0.16)

    def test_ibvp_rejects_congested_data(self):
        """Data above rho_star are rejected."""
        grid = Grid(0.0, 1.0, 10)
        with self.assertRaises(FreeRegimeError):
            solve_ibvp_fv(0.7, 0.2, self.model, grid, 1.0)
        with self.assertRaises(FreeRegimeError):
            solve_ibvp_fv(0.2, 0.7, self.model, grid, 1.0)

    def test_rows(self):
        """Rows carry one line per cell and output time."""
        grid = Grid(0.0, 1.0, 10)
        sol = solve_ibvp_fv(0.1, 0.1, self.model, grid, 0.5)
        rows = sol.rows([0.0, 0.5])
        self.assertEqual(len(rows), 20)
        self.assertEqual(rows[-1][0], sol.end_time)
        self.assertEqual(len(sol.trace_rows()), sol.fluxes.shape[0])

    def test_grid_validation(self):
        """Grids need two cells and a non-empty interval."""
        with self.assertRaises(ValidationError):
            Grid(0.0, 1.0, 1)
        with self.assertRaises(ValidationError):
            Grid(1.0, 1.0, 10)


if __name__ == "__main__":
    unittest.main()
