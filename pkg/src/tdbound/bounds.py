"""Upper bounds for the TDTSP from constant-cost ATSP tours.

Three heuristics share one pattern: choose constant arc costs, solve the
ATSP exactly, evaluate the tour on the original travel times at t=0.

* HTSP uses each arc's worst-case travel time.
* PL-HTSP fits an auxiliary IGP graph on every discretization point and
  uses its long-run travel times ``L_ij / v_last``.
* MLPL-HTSP fits only around predicted arrival times.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .atsp import solve_atsp
from .config import DEFAULT_STEP, TOL
from .errors import ConfigurationError, DomainError
from .fitlp import OmegaSelection, fit_auxiliary
from .tdgraph import TimeDependentGraph, departure_times, tour_duration


class Method(str, Enum):
    HTSP = "HTSP"
    PL_HTSP = "PL_HTSP"
    MLPL_HTSP = "MLPL_HTSP"

    @classmethod
    def parse(cls, name: str) -> "Method":
        key = name.strip().upper().replace("-", "_")
        aliases = {"PL": cls.PL_HTSP, "MLPL": cls.MLPL_HTSP}
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ConfigurationError(f"unknown method {name!r}") from None


@dataclass(frozen=True)
class Discretization:
    """Points ``0, step, 2*step, ...`` up to and including the horizon."""

    step: float = DEFAULT_STEP
    horizon: float = 480.0

    def __post_init__(self):
        if self.step <= 0 or self.horizon <= 0:
            raise DomainError("step and horizon must be positive")

    @property
    def points(self) -> np.ndarray:
        pts = np.arange(0.0, self.horizon, self.step)
        if self.horizon - pts[-1] <= TOL.time_merge:
            pts = pts[:-1]
        return np.append(pts, self.horizon)

    def nearest(self, t: float) -> float:
        pts = self.points
        return float(pts[np.argmin(np.abs(pts - t))])


@dataclass
class BoundResult:
    method: Method
    tour: tuple
    ub: float
    aux_cost: float
    zeta_star: float = None
    wall_time: float = 0.0
    omega_size: int = 0
    omega: np.ndarray = field(default=None, repr=False)
    lp_rows: int = 0


def dev_percent(ub: float, bk: float) -> float:
    """Percentage gap of ``ub`` over the best-known value ``bk``."""
    if not bk > 0:
        raise DomainError(f"best-known value must be positive, got {bk}")
    return 100.0 * (ub - bk) / bk


def htsp_baseline(G: TimeDependentGraph) -> BoundResult:
    start = time.perf_counter()
    c = np.zeros((G.n + 1, G.n + 1))
    for (i, j), f in G.arcs.items():
        c[i, j] = f.max()
    sol = solve_atsp(c)
    ub = tour_duration(G, sol.tour)
    return BoundResult(Method.HTSP, sol.tour, ub, sol.cost,
                       wall_time=time.perf_counter() - start)


def build_omega_full(G: TimeDependentGraph, d: Discretization) -> OmegaSelection:
    return OmegaSelection.uniform(d.points, G.vertices, G.horizon)


def window_points(d: Discretization, centre: float, radius: float) -> np.ndarray:
    """Discretization points in ``[centre - radius, centre + radius]``, else the nearest one."""
    pts = d.points
    inside = pts[(pts >= centre - radius - TOL.time_merge) & (pts <= centre + radius + TOL.time_merge)]
    if len(inside) == 0:
        return np.array([d.nearest(centre)])
    return inside


def depot_times(d: Discretization) -> np.ndarray:
    """The depot is only left at time 0: keep 0 and the next point."""
    return d.points[:2]


def build_omega_ml(model, G: TimeDependentGraph, d: Discretization) -> OmegaSelection:
    from .learn import eta_for_customer, zone_counts

    if G.coordinates is None:
        raise ConfigurationError("ML time windows need customer coordinates")
    if d.horizon != G.horizon:
        raise ConfigurationError("discretization horizon differs from the instance horizon")
    counts = zone_counts(model.zoning, G)
    prediction = model.predict(counts)
    sets = {0: depot_times(d)}
    for i in range(1, G.n + 1):
        f, eps = eta_for_customer(model, G, i, prediction=prediction)
        sets[i] = window_points(d, f, eps)
    return OmegaSelection(sets, G.horizon)


def upper_bound(G: TimeDependentGraph, sel: OmegaSelection, rho: float = None,
                method: Method = Method.PL_HTSP, lp_method: str = "auto") -> BoundResult:
    """Fit the auxiliary graph on ``sel``, solve the ATSP on its long-run costs, evaluate on ``G``."""
    start = time.perf_counter()
    problem, sol, aux = fit_auxiliary(G, sel, rho, lp_method)
    atsp = solve_atsp(aux.long_run_costs())
    ub = tour_duration(G, atsp.tour)
    return BoundResult(method, atsp.tour, ub, atsp.cost, zeta_star=sol.zeta_star,
                       wall_time=time.perf_counter() - start, omega_size=sel.size,
                       omega=sel.union, lp_rows=problem.row_count)


def pl_htsp(G: TimeDependentGraph, step: float = DEFAULT_STEP, rho: float = None, **kw) -> BoundResult:
    start = time.perf_counter()
    sel = build_omega_full(G, Discretization(step, G.horizon))
    res = upper_bound(G, sel, rho, Method.PL_HTSP, **kw)
    res.wall_time = time.perf_counter() - start
    return res


def mlpl_htsp(G: TimeDependentGraph, model, step: float = DEFAULT_STEP, rho: float = None,
              **kw) -> BoundResult:
    start = time.perf_counter()
    sel = build_omega_ml(model, G, Discretization(step, G.horizon))
    res = upper_bound(G, sel, rho, Method.MLPL_HTSP, **kw)
    res.wall_time = time.perf_counter() - start
    return res


def run_method(G: TimeDependentGraph, method, model=None, step: float = DEFAULT_STEP,
               rho: float = None) -> BoundResult:
    method = Method.parse(method) if isinstance(method, str) else method
    if method is Method.HTSP:
        return htsp_baseline(G)
    if method is Method.PL_HTSP:
        return pl_htsp(G, step, rho)
    if model is None:
        raise ConfigurationError("MLPL-HTSP needs a trained ETA model")
    return mlpl_htsp(G, model, step, rho)


@dataclass
class OptimalityReport:
    zeta_star: float
    zero_deviation: bool
    arrivals_covered: bool
    uncovered: list
    evidence: bool
    note: str = ("Zero fitting deviation with every tour arrival sampled is evidence, "
                 "not proof: optimality follows only if the sampled times contain every "
                 "feasible arrival time, which cannot be checked here.")


def optimality_diagnostic(result: BoundResult, G: TimeDependentGraph,
                          step: float = DEFAULT_STEP) -> OptimalityReport:
    """Check whether the bound came with zero fitting deviation at the tour's own arrival times.

    A departure counts as sampled when a point of the selection lies within
    ``step / 2`` of it, or when every arc leaving that vertex is constant in
    time (one sample then fits the whole arc).
    """
    if result.zeta_star is None or result.omega is None:
        raise DomainError("diagnostic needs a fitted bound (PL-HTSP or MLPL-HTSP)")
    zero = result.zeta_star <= TOL.zeta_zero
    times = departure_times(G, result.tour)[:-1]
    vertices = (0, *result.tour)
    omega = np.asarray(result.omega)
    uncovered = []
    for v, t in zip(vertices, times):
        near = np.min(np.abs(omega - t)) <= step / 2 + TOL.time_merge
        flat = all(G.arcs[v, w].is_constant() for w in G.vertices if w != v)
        if not (near or flat):
            uncovered.append((v, t))
    covered = not uncovered
    return OptimalityReport(result.zeta_star, zero, covered, uncovered, zero and covered)
