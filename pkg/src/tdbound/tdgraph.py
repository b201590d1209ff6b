"""Time-dependent graphs, travel-time evaluation and path durations.

Times are minutes as floats. A travel-time function is stored as breakpoint
samples and interpolated linearly; it is constant after the horizon. The
auxiliary graph follows the IGP model: one stepwise speed profile shared by
every arc plus a length per arc.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import TOL
from .errors import DomainError, FifoViolationError, InvalidPathError


@dataclass(frozen=True)
class TimeGrid:
    """Breakpoints ``0 = T_0 < T_1 < ... < T_H = T`` splitting the horizon into H periods."""

    breakpoints: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.ndim != 1 or len(bp) < 2:
            raise DomainError("a time grid needs at least two breakpoints")
        if bp[0] != 0.0:
            raise DomainError(f"first breakpoint must be 0, got {bp[0]}")
        if np.any(np.diff(bp) <= 0):
            raise DomainError("breakpoints must be strictly increasing")
        bp.flags.writeable = False
        object.__setattr__(self, "breakpoints", bp)

    @classmethod
    def uniform(cls, horizon: float, periods: int) -> "TimeGrid":
        return cls(np.linspace(0.0, horizon, periods + 1))

    @property
    def horizon(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def periods(self) -> int:
        return len(self.breakpoints) - 1

    def period_of(self, t: float) -> int:
        """Index h with ``T_h <= t < T_{h+1}``; ``t >= T`` maps to the last period."""
        if t < 0:
            raise DomainError(f"negative time {t}")
        h = bisect.bisect_right(self.breakpoints, t) - 1
        return min(h, self.periods - 1)


@dataclass(frozen=True, eq=False)
class TravelTimeFunction:
    """Piecewise-linear travel time through samples ``(times[k], values[k])``.

    Sample times start at 0 and end at the horizon; for later departures the
    last value holds.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or len(t) < 1:
            raise DomainError("times and values must be 1-d arrays of equal, nonzero length")
        if t[0] != 0.0:
            raise DomainError(f"first sample must be at t=0, got {t[0]}")
        if np.any(np.diff(t) <= 0):
            raise DomainError("sample times must be strictly increasing")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise DomainError("travel times must be finite and positive")
        t.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, value: float, horizon: float) -> "TravelTimeFunction":
        return cls(np.array([0.0, horizon]), np.array([value, value]))

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def __call__(self, t):
        return eval_travel_time(self, t)

    def max(self) -> float:
        # exact for piecewise-linear functions: the max sits on a sample
        return float(self.values.max())

    def is_constant(self) -> bool:
        return bool(np.all(self.values == self.values[0]))

    def __eq__(self, other):
        if not isinstance(other, TravelTimeFunction):
            return NotImplemented
        return np.array_equal(self.times, other.times) and np.array_equal(self.values, other.values)

    __hash__ = None


def eval_travel_time(f: TravelTimeFunction, t):
    """Evaluate ``f`` at departure time(s) ``t``.

    Scalars return a float. Arrays are evaluated elementwise with the same
    arithmetic, so scalar and vectorized results agree bit for bit.
    """
    if np.isscalar(t):
        if t < 0:
            raise DomainError(f"negative departure time {t}")
        return float(np.interp(t, f.times, f.values))
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("negative departure time")
    return np.interp(t, f.times, f.values)


def validate_fifo(f: TravelTimeFunction, tol: float = TOL.fifo) -> list[int]:
    """Segments ``k`` where arrival ``t + f(t)`` decreases from sample k to k+1.

    Checking sample endpoints is sufficient because ``f`` is linear in between.
    """
    arrivals = f.times + f.values
    return [int(k) for k in np.flatnonzero(np.diff(arrivals) < -tol)]


@dataclass(frozen=True, eq=False)
class TimeDependentGraph:
    """Complete digraph on depot 0 and customers 1..n with a FIFO function per arc."""

    n: int
    arcs: dict
    horizon: float
    coordinates: np.ndarray = None
    name: str = ""
    provenance: dict = field(default=None)

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("a graph needs at least one customer")
        missing = [(i, j) for i in range(self.n + 1) for j in range(self.n + 1)
                   if i != j and (i, j) not in self.arcs]
        if missing:
            raise DomainError(f"graph is not complete; missing arcs {missing[:5]}")
        bad = {a: v for a, f in self.arcs.items() if (v := validate_fifo(f))}
        if bad:
            raise FifoViolationError(f"FIFO violated on arcs {sorted(bad)[:10]}")
        if self.coordinates is not None:
            xy = np.asarray(self.coordinates, dtype=float)
            if xy.shape != (self.n + 1, 2):
                raise DomainError(f"coordinates must have shape ({self.n + 1}, 2)")
            object.__setattr__(self, "coordinates", xy)

    @property
    def vertices(self) -> range:
        return range(self.n + 1)

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(np.array([0.0, self.horizon]))

    def tau(self, i: int, j: int, t: float) -> float:
        return eval_travel_time(self.arcs[i, j], t)

    def is_time_invariant(self) -> bool:
        return all(f.is_constant() for f in self.arcs.values())

    @classmethod
    def from_matrix(cls, costs, horizon: float = 480.0, **kw) -> "TimeDependentGraph":
        """Time-invariant graph with ``tau_ij == costs[i][j]``."""
        c = np.asarray(costs, dtype=float)
        n = len(c) - 1
        arcs = {(i, j): TravelTimeFunction.constant(c[i, j], horizon)
                for i in range(n + 1) for j in range(n + 1) if i != j}
        return cls(n, arcs, horizon, **kw)


@dataclass(frozen=True)
class SpeedProfile:
    """Stepwise speed ``v_h`` on each period of ``grid``; ``v_{H-1}`` continues after T."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.periods,):
            raise DomainError(f"expected {self.grid.periods} speeds, got {v.shape}")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise DomainError("speeds must be finite and positive")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        # distance covered from time 0 to each breakpoint
        cum = np.concatenate([[0.0], np.cumsum(v * np.diff(self.grid.breakpoints))])
        cum.flags.writeable = False
        object.__setattr__(self, "_cumulative", cum)

    def speed_at(self, t: float) -> float:
        return float(self.values[self.grid.period_of(t)])

    def distance(self, t):
        """Distance travelled from time 0 to ``t`` (vectorized)."""
        bp = self.grid.breakpoints
        t = np.asarray(t, dtype=float)
        inside = np.interp(t, bp, self._cumulative)
        beyond = self._cumulative[-1] + self.values[-1] * (t - bp[-1])
        return np.where(t > bp[-1], beyond, inside)

    def integral(self, a: float, b: float) -> float:
        """Distance covered between times ``a <= b``."""
        return float(self.distance(b) - self.distance(a))

    def time_at_distance(self, d):
        """Inverse of :meth:`distance` (vectorized)."""
        bp = self.grid.breakpoints
        d = np.asarray(d, dtype=float)
        inside = np.interp(d, self._cumulative, bp)
        beyond = bp[-1] + (d - self._cumulative[-1]) / self.values[-1]
        return np.where(d > self._cumulative[-1], beyond, inside)


def igp_time(profile: SpeedProfile, length: float, t: float) -> float:
    """Travel time of an arc of ``length`` departing at ``t`` under ``profile``.

    Consumes the length period by period at the period's speed until it is
    exhausted. The last period extends indefinitely.
    """
    if t < 0:
        raise DomainError(f"negative departure time {t}")
    bp = profile.grid.breakpoints
    v = profile.values
    last = len(v) - 1
    if t >= bp[-1]:
        return length / v[last]
    k = profile.grid.period_of(t)
    start = t
    ell = length
    arrival = t + ell / v[k]
    while k < last and arrival > bp[k + 1]:
        ell -= v[k] * (bp[k + 1] - t)
        t = bp[k + 1]
        arrival = t + ell / v[k + 1]
        k += 1
    return arrival - start


def igp_times(profile: SpeedProfile, length: float, ts) -> np.ndarray:
    """Vectorized IGP travel times by inverting the cumulative distance."""
    ts = np.asarray(ts, dtype=float)
    start = profile.distance(ts)
    tau = profile.time_at_distance(start + length) - ts
    # trips that stay inside one period get the exact L / v_k
    bp = profile.grid.breakpoints
    k = np.minimum(np.searchsorted(bp, ts, side="right") - 1, len(profile.values) - 1)
    end = np.append(profile._cumulative[1:-1], np.inf)[k]
    return np.where(start + length <= end, length / profile.values[k], tau)


def igp_kinks(profile: SpeedProfile, length: float) -> np.ndarray:
    """Departure times in ``[0, T]`` where the IGP travel time changes slope.

    These are the speed breakpoints themselves and the departures that arrive
    exactly on a breakpoint. Sampling at them makes linear interpolation exact.
    """
    bp = profile.grid.breakpoints
    inner = bp[1:-1]
    reach = profile.distance(inner) - length
    departures = profile.time_at_distance(reach[reach >= 0])
    return np.unique(np.concatenate([bp, departures]))


@dataclass(frozen=True, eq=False)
class AuxiliaryGraph:
    """IGP graph: shared ``profile`` and per-arc ``lengths`` (square matrix, diagonal unused)."""

    profile: SpeedProfile
    lengths: np.ndarray

    def __post_init__(self):
        L = np.asarray(self.lengths, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise DomainError("lengths must be a square matrix")
        off = ~np.eye(len(L), dtype=bool)
        if np.any(L[off] < 0):
            raise DomainError("arc lengths must be nonnegative")
        L.flags.writeable = False
        object.__setattr__(self, "lengths", L)

    @property
    def n(self) -> int:
        return len(self.lengths) - 1

    def long_run_costs(self) -> np.ndarray:
        """Constant travel times after the horizon, ``L_ij / v_{H-1}``; diagonal is inf."""
        c = self.lengths / self.profile.values[-1]
        c = c.copy()
        np.fill_diagonal(c, np.inf)
        return c


def igp_travel_time(a: AuxiliaryGraph, i: int, j: int, t: float) -> float:
    if i == j:
        raise InvalidPathError(f"({i}, {j}) is not an arc")
    return igp_time(a.profile, float(a.lengths[i, j]), t)


def _check_path(p: Sequence[int]):
    for a, b in zip(p, p[1:]):
        if a == b:
            raise InvalidPathError(f"repeated consecutive vertex {a} in path")


def path_duration(G: TimeDependentGraph, p: Sequence[int], t0: float = 0.0) -> float:
    """Duration of path ``p`` started at ``t0``.

    Each arc departs at ``t0`` plus the time spent so far.
    """
    if t0 < 0:
        raise DomainError(f"negative start time {t0}")
    _check_path(p)
    z = 0.0
    for a, b in zip(p, p[1:]):
        z += eval_travel_time(G.arcs[a, b], t0 + z)
    return z


def auxiliary_duration(a: AuxiliaryGraph, p: Sequence[int], t0: float = 0.0) -> float:
    if t0 < 0:
        raise DomainError(f"negative start time {t0}")
    _check_path(p)
    z = 0.0
    for u, w in zip(p, p[1:]):
        z += igp_travel_time(a, u, w, t0 + z)
    return z


def closed_tour(order: Sequence[int]) -> list[int]:
    return [0, *order, 0]


def check_tour(order: Sequence[int], n: int):
    if sorted(order) != list(range(1, n + 1)):
        raise InvalidPathError(f"{list(order)} is not a permutation of customers 1..{n}")


def tour_duration(G: TimeDependentGraph, order: Sequence[int]) -> float:
    """TDTSP objective: depot, customers in ``order``, depot, leaving at time 0."""
    check_tour(order, G.n)
    return path_duration(G, closed_tour(order), 0.0)


def departure_times(G: TimeDependentGraph, order: Sequence[int]) -> list[float]:
    """Time at which the vehicle leaves each vertex of the closed tour, plus the return time.

    Entry 0 is the depot departure (0.0), entry k the arrival at ``order[k-1]``
    and the last entry the return to the depot.
    """
    out = [0.0]
    z = 0.0
    p = closed_tour(order)
    for a, b in zip(p, p[1:]):
        z += eval_travel_time(G.arcs[a, b], z)
        out.append(z)
    return out
