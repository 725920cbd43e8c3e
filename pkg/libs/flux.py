"""
Scalar flux functions.

``FluxModel`` is the traffic flux g(rho) = rho * v(rho) built from a
polynomial velocity law, with its critical density and the inverse of g on
the free branch [0, rho_star]. ``PolynomialFlux`` covers the model fluxes
used by the regularity experiments (Burgers, cubic) and
``PiecewiseLinearFlux`` is the interpolant on the dyadic lattice that front
tracking solves exactly.

Every flux exposes ``kind`` and ``extremum`` so that the Godunov flux can be
evaluated by comparisons only: ``kind="max"`` means the flux increases up to
``extremum`` and decreases after it, ``kind="min"`` the opposite.
"""

import logging
import math

import numpy as np
from numpy.polynomial import Polynomial
from scipy import optimize

from .errors import FluxDomainError, FluxModelError, InfeasibleFluxError

log = logging.getLogger(__name__)

# Tolerance for v(rho_max) = 0, v >= 0 and for density domain checks.
EVAL_TOLERANCE = 1e-12

# Number of points of the grid used to validate unimodality and to bracket
# the critical density before the golden-section search.
UNIMODAL_GRID_POINTS = 10_000

# Absolute tolerance for the critical density and the free-branch inverse.
ROOT_TOLERANCE = 1e-12

# Requests above q_max by at most this much are clamped to q_max.
FLUX_CLAMP_TOLERANCE = 1e-10


class ScalarFlux:
    """Base class of fluxes with at most one interior extremum."""

    kind = "max"
    extremum = math.inf
    lower = -math.inf
    upper = math.inf

    def __call__(self, u):
        raise NotImplementedError

    def derivative(self, u):
        raise NotImplementedError

    def check_domain(self, u, name="state"):
        u = np.asarray(u, dtype=float)
        if np.any(u < self.lower - EVAL_TOLERANCE) or np.any(u > self.upper + EVAL_TOLERANCE):
            raise FluxDomainError(
                f"{name} outside [{self.lower}, {self.upper}]: "
                f"min={float(np.min(u))}, max={float(np.max(u))}"
            )


class PolynomialFlux(ScalarFlux):
    """A polynomial flux on the whole line."""

    def __init__(self, coefficients, kind="max", extremum=math.inf, name="polynomial"):
        self.poly = Polynomial(coefficients)
        self.dpoly = self.poly.deriv()
        self.kind = kind
        self.extremum = extremum
        self.name = name

    def __call__(self, u):
        return self.poly(u)

    def derivative(self, u):
        return self.dpoly(u)

    def __repr__(self):
        return f"PolynomialFlux({self.name})"


def burgers():
    """f(u) = u**2, convex with its minimum at 0."""
    return PolynomialFlux([0.0, 0.0, 1.0], kind="min", extremum=0.0, name="burgers")


def cubic():
    """f(u) = u**3, increasing with an inflection point at 0."""
    return PolynomialFlux([0.0, 0.0, 0.0, 1.0], kind="max", extremum=math.inf, name="cubic")


class FluxModel(ScalarFlux):
    """
    Traffic flux g(rho) = rho * v(rho) on [0, rho_max].

    Args:
        velocity (Polynomial | sequence): Coefficients of v in increasing degree.
        rho_max (float): Maximal density, v(rho_max) = 0.
        rho_star (float, optional): Analytic critical density; computed when omitted.
        name (str): Label used in logs and reports.
    """

    kind = "max"

    def __init__(self, velocity, rho_max=1.0, rho_star=None, name="polynomial"):
        self.name = name
        self.rho_max = float(rho_max)
        if self.rho_max <= 0:
            raise FluxModelError(f"rho_max must be positive, got {rho_max}")
        self.lower = 0.0
        self.upper = self.rho_max

        self.velocity = velocity if isinstance(velocity, Polynomial) else Polynomial(velocity)
        self.flow = Polynomial([0.0, 1.0]) * self.velocity
        self.flow_prime = self.flow.deriv()

        self._validate()
        self.rho_star = critical_density(self) if rho_star is None else float(rho_star)
        if not 0 < self.rho_star < self.rho_max:
            raise FluxModelError(f"critical density {self.rho_star} outside (0, {self.rho_max})")
        self.extremum = self.rho_star
        self.q_max = float(self.flow(self.rho_star))
        log.debug(
            "flux model %s: rho_max=%g rho_star=%.15g q_max=%.15g",
            name,
            self.rho_max,
            self.rho_star,
            self.q_max,
        )

    def _validate(self):
        if abs(self.velocity(self.rho_max)) > EVAL_TOLERANCE:
            raise FluxModelError(f"v(rho_max) must vanish, got {self.velocity(self.rho_max)}")

        grid = np.linspace(0.0, self.rho_max, UNIMODAL_GRID_POINTS)
        if np.any(self.velocity(grid) < -EVAL_TOLERANCE):
            raise FluxModelError("velocity law takes negative values on [0, rho_max]")

        slope = self.flow_prime(grid[1:-1])
        increasing = slope > 0
        if not increasing[0]:
            raise FluxModelError("flux must increase near rho = 0")
        # once g' <= 0 it must stay there
        if np.any(np.diff(increasing.astype(int)) > 0):
            raise FluxModelError("flux is not unimodal on [0, rho_max]")

    def v(self, rho):
        return self.velocity(rho)

    def g(self, rho):
        return self.flow(rho)

    def g_prime(self, rho):
        return self.flow_prime(rho)

    def __call__(self, rho):
        return self.flow(rho)

    def derivative(self, rho):
        return self.flow_prime(rho)

    def max_speed(self):
        """Largest |g'| and largest v over the free branch [0, rho_star]."""
        grid = np.linspace(0.0, self.rho_star, 1025)
        return float(np.max(np.abs(self.flow_prime(grid)))), float(np.max(self.velocity(grid)))

    def __repr__(self):
        return f"FluxModel({self.name}, rho_max={self.rho_max}, rho_star={self.rho_star})"


def lwr_linear(V=1.0, rho_max=1.0, rho_star=None):
    """Greenshields law v(rho) = V (1 - rho / rho_max); rho_star = rho_max / 2."""
    if rho_star is None:
        rho_star = rho_max / 2.0
    return FluxModel([V, -V / rho_max], rho_max=rho_max, rho_star=rho_star, name="lwr_linear")


def polynomial_model(coefficients, rho_max=1.0, rho_star=None):
    """Velocity law given by polynomial coefficients in increasing degree."""
    return FluxModel(list(coefficients), rho_max=rho_max, rho_star=rho_star, name="polynomial")


def model_from_config(spec):
    """
    Builds the flux model named in a scenario's ``flux`` table.

    Args:
        spec (dict): ``{"model": "lwr_linear", "V": .., "rho_max": ..}`` or
            ``{"model": "polynomial", "coefficients": [..], "rho_max": ..}``.

    Returns:
        FluxModel: The model.
    """
    spec = spec or {"model": "lwr_linear"}
    name = spec.get("model", "lwr_linear")
    rho_max = float(spec.get("rho_max", 1.0))
    if name == "lwr_linear":
        return lwr_linear(V=float(spec.get("V", 1.0)), rho_max=rho_max, rho_star=spec.get("rho_star"))
    if name == "polynomial":
        if "coefficients" not in spec:
            raise FluxModelError("polynomial flux model needs 'coefficients'")
        return polynomial_model(spec["coefficients"], rho_max=rho_max, rho_star=spec.get("rho_star"))
    raise FluxModelError(f"unknown flux model {name!r}")


def flux(model, rho):
    """
    Evaluates g(rho) = rho * v(rho) after checking the domain.

    Args:
        model (FluxModel): The flux model.
        rho: Density or array of densities in [0, rho_max].

    Returns:
        The flow.
    """
    model.check_domain(rho, name="density")
    out = model.g(rho)
    return float(out) if np.ndim(out) == 0 else out


def critical_density(model):
    """
    Location of the maximum of g on [0, rho_max].

    A grid scan brackets the maximum, a golden-section search narrows it and
    a root of g' polishes it to ``ROOT_TOLERANCE``.
    """
    grid = np.linspace(0.0, model.rho_max, UNIMODAL_GRID_POINTS)
    values = model.g(grid)
    i = int(np.argmax(values))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]

    if 0 < i < grid.size - 1 and values[i] > values[i - 1] and values[i] > values[i + 1]:
        result = optimize.minimize_scalar(
            lambda r: -model.g(r), bracket=(lo, grid[i], hi), method="golden", tol=1e-10
        )
        estimate = float(result.x)
    else:
        estimate = float(grid[i])

    if model.g_prime(lo) > 0 > model.g_prime(hi):
        estimate = optimize.brentq(model.g_prime, lo, hi, xtol=ROOT_TOLERANCE)
    return float(estimate)


def invert_flux_free(model, q, clamp_tolerance=FLUX_CLAMP_TOLERANCE):
    """
    The density rho in [0, rho_star] with g(rho) = q.

    Args:
        model (FluxModel): The flux model.
        q (float): Requested flow, 0 <= q <= q_max.
        clamp_tolerance (float): Excess over q_max that is still clamped.

    Returns:
        float: The free-branch density.
    """
    q = float(q)
    if q > model.q_max + clamp_tolerance:
        raise InfeasibleFluxError(
            f"flow {q:.17g} exceeds capacity q_max={model.q_max:.17g}; "
            "the demand requires congestion"
        )
    if q < -clamp_tolerance:
        raise FluxDomainError(f"negative flow {q:.17g} cannot be inverted")
    if q <= 0.0:
        return 0.0
    if q >= model.q_max:
        return model.rho_star
    return float(
        optimize.bisect(lambda r: model.g(r) - q, 0.0, model.rho_star, xtol=ROOT_TOLERANCE)
    )


class PiecewiseLinearFlux(ScalarFlux):
    """
    Affine interpolant of a flux on the lattice 2**-level * Z.

    Attributes:
        level (int): Refinement index.
        breakpoints (np.ndarray): Lattice points covering the working range.
        values (np.ndarray): Exact flux values at the breakpoints.
    """

    def __init__(self, level, breakpoints, values, source=None):
        self.level = int(level)
        self.step = 2.0**-self.level
        self.breakpoints = np.asarray(breakpoints, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.source = source
        self.lower = float(self.breakpoints[0])
        self.upper = float(self.breakpoints[-1])
        self.slopes = np.diff(self.values) / np.diff(self.breakpoints)
        self.kind, self.extremum = self._shape()

    def _shape(self):
        imax, imin = int(np.argmax(self.values)), int(np.argmin(self.values))
        last = self.values.size - 1
        if 0 < imin < last and self.values[imin] < min(self.values[0], self.values[-1]):
            return "min", float(self.breakpoints[imin])
        if imax == last:
            return "max", math.inf
        if imax == 0:
            return "min", math.inf
        return "max", float(self.breakpoints[imax])

    def __call__(self, u):
        return np.interp(u, self.breakpoints, self.values)

    def derivative(self, u):
        """Right derivative; the last slope is used at the upper end."""
        idx = np.searchsorted(self.breakpoints, u, side="right") - 1
        idx = np.clip(idx, 0, self.slopes.size - 1)
        return self.slopes[idx]

    def index(self, u):
        """Lattice index of ``u`` relative to the first breakpoint."""
        return int(round((float(u) - self.lower) / self.step))

    def at_lattice(self, u):
        """Exact stored value at a lattice point."""
        return float(self.values[self.index(u)])

    def lattice_between(self, a, b):
        """Breakpoints and values for the lattice points of [min(a,b), max(a,b)]."""
        i, j = sorted((self.index(a), self.index(b)))
        if i < 0 or j >= self.values.size:
            raise FluxDomainError(
                f"states {a}, {b} outside the interpolation range [{self.lower}, {self.upper}]"
            )
        return self.breakpoints[i : j + 1], self.values[i : j + 1]

    def slope_range(self, lo, hi):
        """Smallest and largest slope on the segments inside [lo, hi]."""
        i, j = sorted((self.index(lo), self.index(hi)))
        if i == j:
            return 0.0, 0.0
        segment = self.slopes[i:j]
        return float(segment.min()), float(segment.max())

    def __repr__(self):
        return f"PiecewiseLinearFlux(level={self.level}, range=[{self.lower}, {self.upper}])"


def piecewise_linearize(f, level, lo, hi):
    """
    Interpolates ``f`` on the lattice 2**-level * Z over [lo, hi].

    The range is snapped outward to the lattice.

    Args:
        f (callable): Flux to interpolate (a ScalarFlux or any vectorized function).
        level (int): Refinement index, at least 1.
        lo (float): Lower end of the working range.
        hi (float): Upper end of the working range.

    Returns:
        PiecewiseLinearFlux: The interpolant.
    """
    if level < 1:
        raise FluxDomainError(f"refinement level must be at least 1, got {level}")
    if hi < lo:
        lo, hi = hi, lo
    step = 2.0**-level
    first = math.floor(lo / step)
    last = math.ceil(hi / step)
    if last == first:
        last += 1
    breakpoints = step * np.arange(first, last + 1, dtype=float)
    values = np.asarray(f(breakpoints), dtype=float)
    return PiecewiseLinearFlux(level, breakpoints, values, source=f)
