"""
Piecewise-constant profiles used for every kind of datum: densities and
fractions in space, boundary data in time, and the exact states produced by
front tracking.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


def _normalize(breakpoints, values):
    # drop zero-width pieces, then merge neighbours with equal values
    keep_values = [values[0]]
    keep_points = []
    for i, point in enumerate(breakpoints):
        if keep_points and point == keep_points[-1]:
            keep_values[-1] = values[i + 1]
            continue
        keep_points.append(point)
        keep_values.append(values[i + 1])

    points, vals = [], [keep_values[0]]
    for point, value in zip(keep_points, keep_values[1:]):
        if value == vals[-1]:
            continue
        points.append(point)
        vals.append(value)
    return np.asarray(points, dtype=float), np.asarray(vals, dtype=float)


@dataclass(frozen=True)
class StepFunction:
    """
    Right-continuous step function on the real line.

    ``values[0]`` holds left of ``breakpoints[0]``, ``values[i]`` on
    ``[breakpoints[i-1], breakpoints[i])`` and ``values[-1]`` right of the last
    breakpoint. Zero-width pieces and equal neighbours are merged on
    construction, so stored jumps are never zero.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        points = np.atleast_1d(np.asarray(self.breakpoints, dtype=float))
        vals = np.atleast_1d(np.asarray(self.values, dtype=float))
        if vals.size != points.size + 1:
            raise ValidationError(
                f"step function needs one more value than breakpoints "
                f"({vals.size} values, {points.size} breakpoints)"
            )
        if np.any(np.diff(points) < 0):
            raise ValidationError("step function breakpoints must be non-decreasing")
        if not np.all(np.isfinite(vals)) or not np.all(np.isfinite(points)):
            raise ValidationError("step function values must be finite")

        points, vals = _normalize(points.tolist(), vals.tolist())
        object.__setattr__(self, "breakpoints", points)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, value):
        return cls(np.empty(0), np.array([value], dtype=float))

    @classmethod
    def from_config(cls, spec, name="profile"):
        """
        Builds a profile from its config form: a number for a constant, or a
        table ``{"breakpoints": [...], "values": [...]}``.

        Args:
            spec: The config value.
            name (str): Used in error messages.

        Returns:
            StepFunction: The profile.
        """
        if isinstance(spec, StepFunction):
            return spec
        if isinstance(spec, (int, float)) and not isinstance(spec, bool):
            return cls.constant(float(spec))
        if isinstance(spec, dict) and "values" in spec:
            return cls(spec.get("breakpoints", []), spec["values"])
        raise ValidationError(
            f"{name}: expected a number or a table with breakpoints/values, got {spec!r}"
        )

    @classmethod
    def from_samples(cls, centers, samples):
        """Step function with one piece per sample, jumps half-way between centers."""
        centers = np.asarray(centers, dtype=float)
        samples = np.asarray(samples, dtype=float)
        return cls(0.5 * (centers[1:] + centers[:-1]), samples)

    def __call__(self, x, side="right"):
        """
        Evaluates the profile. At a breakpoint ``side="right"`` returns the
        value on its right and ``side="left"`` the value on its left.
        """
        idx = np.searchsorted(self.breakpoints, x, side="right" if side == "right" else "left")
        return self.values[idx]

    @property
    def jumps(self):
        """List of ``(position, left value, right value)``."""
        return [
            (float(p), float(self.values[i]), float(self.values[i + 1]))
            for i, p in enumerate(self.breakpoints)
        ]

    def total_variation(self):
        return float(np.sum(np.abs(np.diff(self.values))))

    def range(self):
        return float(self.values.min()), float(self.values.max())

    def antiderivative(self, x):
        """Primitive vanishing at the first breakpoint (at 0 for constants)."""
        x = np.asarray(x, dtype=float)
        if self.breakpoints.size == 0:
            return self.values[0] * x
        knots = self.breakpoints
        at_knots = np.concatenate(([0.0], np.cumsum(self.values[1:-1] * np.diff(knots))))
        idx = np.searchsorted(knots, x, side="right")
        left_of_first = self.values[0] * (x - knots[0])
        anchor = at_knots[np.maximum(idx - 1, 0)]
        inside = anchor + self.values[idx] * (x - knots[np.maximum(idx - 1, 0)])
        return np.where(idx == 0, left_of_first, inside)

    def integral(self, a, b):
        return float(self.antiderivative(b) - self.antiderivative(a))

    def cell_averages(self, edges):
        """
        Exact averages over consecutive cells.

        Args:
            edges (np.ndarray): Increasing cell edges.

        Returns:
            np.ndarray: One average per cell.
        """
        edges = np.asarray(edges, dtype=float)
        primitive = self.antiderivative(edges)
        return np.diff(primitive) / np.diff(edges)

    def restricted(self, lo, hi):
        """The same profile with breakpoints outside ``(lo, hi)`` removed."""
        mask = (self.breakpoints > lo) & (self.breakpoints < hi)
        first = int(np.searchsorted(self.breakpoints, lo, side="right"))
        kept = self.breakpoints[mask]
        values = self.values[first : first + kept.size + 1]
        return StepFunction(kept, values)

    def shifted(self, offset):
        return StepFunction(self.breakpoints + offset, self.values)

    def map(self, fn):
        """Applies ``fn`` to every value (vectorized)."""
        return StepFunction(self.breakpoints, fn(self.values))

    def __add__(self, other):
        other = StepFunction.from_config(other, name="addend")
        points = np.union1d(self.breakpoints, other.breakpoints)
        if points.size == 0:
            return StepFunction.constant(self.values[0] + other.values[0])
        samples = np.concatenate(([points[0] - 1.0], points))
        return StepFunction(points, self(samples) + other(samples))

    def scaled(self, factor):
        return StepFunction(self.breakpoints, self.values * factor)
