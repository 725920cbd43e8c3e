"""
Boundary traces of the solvers.

A trace is a piecewise-constant function of time: ``values[i]`` holds on
``[times[i], times[i+1])`` and the last value up to ``end_time``. For the
finite-volume engines the trace of a flux is the numerical flux through the
boundary interface, which is exactly the distributional trace of the scheme;
for front tracking it is the flux of the exact one-sided limit.

Orientation: stored values are physical flows to the right. The inward
orientation used by the divergence identities only flips the sign at the
left end (``alpha+``); see ``TraceSeries.oriented``.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, TraceKindError

log = logging.getLogger(__name__)

KINDS = ("density", "flow", "theta_flow")
FLOW_KINDS = ("flow", "theta_flow")
SIDES = ("alpha+", "beta-", "x-", "x+", "d-", "d+")

# Flow values may leave [0, q_max] by this much (relative to max(1, q_max)).
FLOW_TOLERANCE = 1e-9


@dataclass(frozen=True)
class TraceSeries:
    """
    Time-sampled trace at one endpoint of a road.

    Flow kinds are rightward flows and must lie in ``[0, q_max]``; without
    ``q_max`` only the lower bound is checked.
    """

    times: np.ndarray
    values: np.ndarray
    end_time: float
    kind: str = "flow"
    side: str = "beta-"
    q_max: float = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or times.ndim != 1:
            raise ConsistencyError("trace times and values must be 1-d arrays of equal length")
        if times.size and np.any(np.diff(times) <= 0):
            raise ConsistencyError("trace times must be strictly increasing")
        if times.size and self.end_time < times[-1]:
            raise ConsistencyError("trace ends before its last sample")
        if self.kind not in KINDS:
            raise TraceKindError(f"unknown trace kind {self.kind!r}")
        if self.kind in FLOW_KINDS and values.size:
            self._check_flow_range(values)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def _check_flow_range(self, values):
        scale = FLOW_TOLERANCE * max(1.0, self.q_max or 0.0)
        low = float(np.min(values))
        if low < -scale:
            raise ConsistencyError(f"{self.kind} trace at {self.side} is negative: {low:.17g}")
        if self.q_max is not None:
            high = float(np.max(values))
            if high > self.q_max + scale:
                raise ConsistencyError(
                    f"{self.kind} trace at {self.side} exceeds q_max={self.q_max:.17g}: {high:.17g}"
                )

    @property
    def durations(self):
        return np.diff(np.append(self.times, self.end_time))

    def value_at(self, t):
        idx = np.searchsorted(self.times, t, side="right") - 1
        return self.values[np.clip(idx, 0, self.values.size - 1)]

    def total_variation(self):
        return float(np.sum(np.abs(np.diff(self.values))))

    def integral(self):
        return float(np.sum(self.values * self.durations))

    def oriented(self):
        """Values in the inward-normal convention: negated at ``alpha+`` and ``d+``."""
        sign = -1.0 if self.side in ("alpha+", "d+") else 1.0
        return sign * self.values

    def mapped(self, fn, kind, q_max=None):
        """A trace of the same times with ``fn`` applied to every value."""
        return TraceSeries(self.times, fn(self.values), self.end_time, kind=kind, side=self.side, q_max=q_max)

    def compressed(self):
        """The same trace with consecutive equal values merged."""
        if self.values.size == 0:
            return self
        keep = np.concatenate(([True], self.values[1:] != self.values[:-1]))
        return TraceSeries(self.times[keep], self.values[keep], self.end_time, self.kind, self.side, self.q_max)

    def rows(self):
        """CSV rows ``(t, value, kind, side)``."""
        return [(t, v, self.kind, self.side) for t, v in zip(self.times, self.values)]


def sum_traces(traces, kind=None, side=None):
    """Pointwise sum of traces sharing a time axis."""
    traces = list(traces)
    first = traces[0]
    for trace in traces[1:]:
        if trace.times.shape != first.times.shape or np.any(trace.times != first.times):
            raise ConsistencyError("traces to be summed must share their time axis")
    total = np.sum([t.values for t in traces], axis=0)
    return TraceSeries(first.times, total, first.end_time, kind or first.kind, side or first.side, first.q_max)


def strong_flux_trace(sol, end):
    """
    Flux trace at an endpoint of a solved road.

    Args:
        sol: A ``GridSolution`` or a ``FrontTrackingSolution``.
        end (str): ``"alpha+"`` or ``"beta-"``.

    Returns:
        TraceSeries: Flow trace.
    """
    if end not in ("alpha+", "beta-"):
        raise TraceKindError(f"endpoint must be alpha+ or beta-, got {end!r}")
    if hasattr(sol, "left_flux_trace"):
        return sol.left_flux_trace if end == "alpha+" else sol.right_flux_trace

    # front tracking: exact flux of the one-sided limit at the endpoint
    return sol.boundary_trace(end).mapped(sol.flux, kind="flow", q_max=getattr(sol.flux, "q_max", None))


def distributional_theta_trace(sol, end):
    """
    Trace of the flux of m = rho * theta at an endpoint.

    Both readings are available on the result: ``values`` are physical
    (rightward) flows and ``oriented()`` applies the inward-normal sign.

    Args:
        sol (ThetaSolution): A solved transport problem.
        end (str): ``"alpha+"`` or ``"beta-"``.

    Returns:
        TraceSeries: A ``theta_flow`` trace.
    """
    if end == "alpha+":
        return sol.left_flux_trace
    if end == "beta-":
        return sol.right_flux_trace
    raise TraceKindError(f"endpoint must be alpha+ or beta-, got {end!r}")


def interface_traces(fluxes, times, end_time, index, kind="theta_flow"):
    """
    The pair of one-sided traces through an interior interface.

    The subdomain on the left sees the interface flux as its ``d-`` trace and
    the one on the right as its ``d+`` trace; in the inward convention the two
    differ by sign only.

    Args:
        fluxes (np.ndarray): Per-step interface fluxes, shape (steps, interfaces).
        times (np.ndarray): Step start times.
        end_time (float): End of the last step.
        index (int): Interface index.
        kind (str): Trace kind.

    Returns:
        tuple[TraceSeries, TraceSeries]: ``(d-, d+)`` traces.
    """
    values = np.asarray(fluxes)[:, index]
    left = TraceSeries(times, values, end_time, kind=kind, side="d-")
    right = TraceSeries(times, values, end_time, kind=kind, side="d+")
    return left, right


def trace_l1_distance(a, b):
    """
    L1 distance of two traces over their common time range.

    Both traces are read as piecewise constant on the merged partition of
    their sample times.

    Args:
        a (TraceSeries): First trace.
        b (TraceSeries): Second trace.

    Returns:
        float: The distance.
    """
    if a.kind != b.kind:
        raise TraceKindError(f"cannot compare a {a.kind} trace with a {b.kind} trace")
    if a.times.size == 0 or b.times.size == 0:
        return 0.0
    start = max(a.times[0], b.times[0])
    stop = min(a.end_time, b.end_time)
    if stop <= start:
        return 0.0
    cuts = np.concatenate(([start, stop], a.times, b.times))
    cuts = np.unique(cuts[(cuts >= start) & (cuts <= stop)])
    lefts = cuts[:-1]
    widths = np.diff(cuts)
    return float(np.sum(np.abs(a.value_at(lefts) - b.value_at(lefts)) * widths))
