"""Fit a shared speed step function and arc lengths to a time-dependent graph.

The fit samples each arc at the departure times of its tail's time set
``S_i``. For every sample it asks that the distance covered under the
fitted speed during the original travel time, ``x_ijk``, is the same for
all samples of the arc; the LP minimizes the summed spread
``max_k x_ijk - min_k x_ijk`` over arcs. The fitted lengths are the
per-arc means of ``x``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from .config import TOL
from .errors import DomainError, ParameterError
from .lp import LinearProgram, choose_method, solve_lp
from .tdgraph import AuxiliaryGraph, SpeedProfile, TimeDependentGraph, TimeGrid


class DegenerateArcWarning(UserWarning):
    """An arc was fitted with zero length, so its auxiliary travel time is 0."""


def merge_times(times, tol: float = TOL.time_merge) -> np.ndarray:
    """Sort and drop points within ``tol`` of the previously kept point."""
    t = np.sort(np.asarray(times, dtype=float))
    if len(t) == 0:
        return t
    keep = [t[0]]
    for x in t[1:]:
        if x - keep[-1] > tol:
            keep.append(x)
    return np.array(keep)


@dataclass(frozen=True, eq=False)
class OmegaSelection:
    """Sampled departure times per tail vertex; every arc ``(i, j)`` uses ``S_i``."""

    per_node_sets: Mapping[int, np.ndarray]
    horizon: float

    def __post_init__(self):
        sets = {}
        for i, s in self.per_node_sets.items():
            s = merge_times(s)
            if len(s) == 0:
                raise DomainError(f"time set of vertex {i} is empty")
            if s[0] < -TOL.time_merge or s[-1] > self.horizon + TOL.time_merge:
                raise DomainError(f"time set of vertex {i} leaves [0, {self.horizon}]")
            sets[int(i)] = np.clip(s, 0.0, self.horizon)
        object.__setattr__(self, "per_node_sets", sets)
        union = merge_times(np.concatenate(list(sets.values())))
        object.__setattr__(self, "union", union)
        object.__setattr__(self, "grid", TimeGrid(merge_times(np.concatenate([[0.0, self.horizon], union]))))

    @classmethod
    def uniform(cls, times, vertices, horizon: float) -> "OmegaSelection":
        return cls({i: np.asarray(times, dtype=float) for i in vertices}, horizon)

    @property
    def size(self) -> int:
        return len(self.union)

    def default_rho(self) -> float:
        """Reciprocal of the shortest interval of the induced grid."""
        return 1.0 / float(np.diff(self.grid.breakpoints).min())


@dataclass(frozen=True, eq=False)
class CoefficientMatrix:
    """Sparse coefficients ``a_ijkh``: one row per (arc, sampled time), one column per grid interval.

    Row ``r`` belongs to arc ``arcs[row_arc[r]]`` and departure time ``row_time[r]``;
    ``row_tau[r]`` is the original travel time at that departure.
    """

    matrix: sp.csr_matrix
    arcs: list
    row_arc: np.ndarray
    row_time: np.ndarray
    row_tau: np.ndarray
    grid: TimeGrid

    @property
    def num_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_intervals(self) -> int:
        return self.matrix.shape[1]

    def rows_of(self, i: int, j: int) -> np.ndarray:
        a = self.arcs.index((i, j))
        return np.flatnonzero(self.row_arc == a)

    def block(self, i: int, j: int) -> np.ndarray:
        """Dense ``a[k][h]`` for arc ``(i, j)``."""
        return self.matrix[self.rows_of(i, j)].toarray()


def overlap_coefficients(starts, taus, breakpoints) -> np.ndarray:
    """Overlap of ``[s, s + tau]`` with each grid interval, last interval open-ended.

    The last interval runs to ``max(T, s + tau)`` so that arrivals past the
    horizon are charged at the final speed and each row sums to ``tau``.
    """
    s = np.asarray(starts, dtype=float)[:, None]
    arr = s + np.asarray(taus, dtype=float)[:, None]
    lo = np.maximum(s, breakpoints[None, :-1])
    hi_edges = np.broadcast_to(breakpoints[None, 1:], (len(s), len(breakpoints) - 1)).copy()
    hi_edges[:, -1] = np.maximum(hi_edges[:, -1], arr[:, 0])
    hi = np.minimum(arr, hi_edges)
    return np.clip(hi - lo, 0.0, None)


def build_coefficients(G: TimeDependentGraph, sel: OmegaSelection) -> CoefficientMatrix:
    bp = sel.grid.breakpoints
    blocks, arcs, row_arc, row_time, row_tau = [], [], [], [], []
    for i in G.vertices:
        times = sel.per_node_sets.get(i)
        if times is None:
            raise DomainError(f"no time set for vertex {i}")
        for j in G.vertices:
            if i == j:
                continue
            tau = G.arcs[i, j](times)
            blocks.append(sp.csr_matrix(overlap_coefficients(times, tau, bp)))
            row_arc.append(np.full(len(times), len(arcs)))
            row_time.append(times)
            row_tau.append(tau)
            arcs.append((i, j))
    return CoefficientMatrix(sp.vstack(blocks, format="csr"), arcs,
                             np.concatenate(row_arc), np.concatenate(row_time),
                             np.concatenate(row_tau), sel.grid)


@dataclass(frozen=True, eq=False)
class FitProblem:
    """The fitting LP.

    Variable layout: speeds ``y`` (one per grid interval), ``x`` (one per
    coefficient row), then per-arc minima ``x_lo`` and maxima ``x_hi``.
    """

    coefficients: CoefficientMatrix
    rho: float
    lp: LinearProgram

    @property
    def num_y(self) -> int:
        return self.coefficients.num_intervals

    @property
    def num_x(self) -> int:
        return self.coefficients.num_rows

    @property
    def num_arcs(self) -> int:
        return len(self.coefficients.arcs)

    @property
    def num_eq_rows(self) -> int:
        return self.num_x

    @property
    def num_ineq_rows(self) -> int:
        return 2 * self.num_x

    @property
    def row_count(self) -> int:
        return self.num_eq_rows + self.num_ineq_rows

    def slices(self):
        H, R, A = self.num_y, self.num_x, self.num_arcs
        return slice(0, H), slice(H, H + R), slice(H + R, H + R + A), slice(H + R + A, H + R + 2 * A)


def assemble_fit_lp(co: CoefficientMatrix, rho: float) -> FitProblem:
    if not rho > 0:
        raise ParameterError(f"rho must be positive, got {rho}")
    if not co.arcs or co.num_rows == 0:
        raise ParameterError("the fit needs at least one arc")
    H, R, A = co.num_intervals, co.num_rows, len(co.arcs)
    eye_x = sp.identity(R, format="csr")
    arc_of = sp.csr_matrix((np.ones(R), (np.arange(R), co.row_arc)), shape=(R, A))
    zeros_a = sp.csr_matrix((R, A))
    zeros_h = sp.csr_matrix((R, H))

    # a.y - x = 0
    A_eq = sp.hstack([co.matrix, -eye_x, zeros_a, zeros_a], format="csr")
    # x_lo - x <= 0  and  x - x_hi <= 0
    A_ub = sp.vstack([
        sp.hstack([zeros_h, -eye_x, arc_of, zeros_a]),
        sp.hstack([zeros_h, eye_x, zeros_a, -arc_of]),
    ], format="csr")
    c = np.concatenate([np.zeros(H + R), -np.ones(A), np.ones(A)])
    lower = np.concatenate([np.full(H, float(rho)), np.zeros(R + 2 * A)])
    upper = np.full(H + R + 2 * A, np.inf)

    lp = LinearProgram(c, A_eq, np.zeros(R), lower, upper, A_ub, np.zeros(2 * R))
    return FitProblem(co, float(rho), lp)


def fit_lp_text(problem: FitProblem) -> str:
    """LP dump with readable names.

    Row order: fit rows ``fit_i_j_k`` (arc-major, then sample k), then the
    ``lo_i_j_k`` rows, then the ``hi_i_j_k`` rows.
    """
    co = problem.coefficients
    labels = list(_row_labels(co))
    lp = problem.lp
    lp.var_names = ([f"y{h}" for h in range(problem.num_y)]
                    + [f"x_{i}_{j}_{k}" for (i, j), k in labels]
                    + [f"xlo_{i}_{j}" for i, j in co.arcs] + [f"xhi_{i}_{j}" for i, j in co.arcs])
    lp.row_names = [f"{kind}_{i}_{j}_{k}" for kind in ("fit", "lo", "hi") for (i, j), k in labels]
    try:
        return lp.to_text()
    finally:
        lp.var_names = lp.row_names = None


def _row_labels(co: CoefficientMatrix):
    counter = {}
    for a in co.row_arc:
        k = counter.get(a, 0)
        counter[a] = k + 1
        yield co.arcs[a], k


@dataclass(frozen=True, eq=False)
class FitSolution:
    """Optimal fit. ``x`` and ``residuals`` are per coefficient row, the rest per arc."""

    y: np.ndarray
    x: np.ndarray
    x_lo: np.ndarray
    x_hi: np.ndarray
    zeta_star: float
    x_tilde: np.ndarray
    residuals: np.ndarray
    arcs: list
    lp_method: str = ""


def reduced_lp(problem: FitProblem) -> LinearProgram:
    """The same LP with ``x`` substituted by ``a.y``: variables ``y, x_lo, x_hi``.

    ``x >= 0`` holds automatically because ``a >= 0`` and ``y >= rho > 0``.
    """
    co = problem.coefficients
    H, R, A = problem.num_y, problem.num_x, problem.num_arcs
    arc_of = sp.csr_matrix((np.ones(R), (np.arange(R), co.row_arc)), shape=(R, A))
    zeros_a = sp.csr_matrix((R, A))
    A_ub = sp.vstack([sp.hstack([-co.matrix, arc_of, zeros_a]),
                      sp.hstack([co.matrix, zeros_a, -arc_of])], format="csr")
    c = np.concatenate([np.zeros(H), -np.ones(A), np.ones(A)])
    lower = np.concatenate([np.full(H, problem.rho), np.zeros(2 * A)])
    return LinearProgram(c, None, np.zeros(0), lower, np.full(H + 2 * A, np.inf),
                         A_ub, np.zeros(2 * R))


def solve_fit(problem: FitProblem, method: str = "auto") -> FitSolution:
    """Solve the fit. ``method`` as in :func:`tdbound.lp.solve_lp`.

    HiGHS gets the reduced form, which is about twice as fast on large fits.
    """
    lp = problem.lp
    if method == "auto":
        method = choose_method(lp)
    if method == "highs":
        res = solve_lp(reduced_lp(problem), "highs")
    else:
        res = solve_lp(lp, method)
    co = problem.coefficients
    y = np.maximum(res.x[:problem.num_y], problem.rho)
    # recompute x from y so the fit identity holds exactly
    x = co.matrix @ y
    counts = np.bincount(co.row_arc, minlength=len(co.arcs))
    x_tilde = np.bincount(co.row_arc, weights=x, minlength=len(co.arcs)) / counts
    x_lo = np.full(len(co.arcs), np.inf)
    x_hi = np.full(len(co.arcs), -np.inf)
    np.minimum.at(x_lo, co.row_arc, x)
    np.maximum.at(x_hi, co.row_arc, x)
    return FitSolution(y=y, x=x, x_lo=x_lo, x_hi=x_hi,
                       zeta_star=float(np.sum(x_hi - x_lo)), x_tilde=x_tilde,
                       residuals=x - x_tilde[co.row_arc], arcs=list(co.arcs),
                       lp_method=res.method)


def extract_auxiliary(sol: FitSolution, sel: OmegaSelection) -> AuxiliaryGraph:
    """Auxiliary graph with speeds ``y*`` on the selection's grid and lengths ``x~*``."""
    n = max(max(a) for a in sol.arcs)
    L = np.zeros((n + 1, n + 1))
    for (i, j), length in zip(sol.arcs, sol.x_tilde):
        L[i, j] = length
    zero = [a for a, length in zip(sol.arcs, sol.x_tilde) if length <= 0]
    if zero:
        warnings.warn(f"arcs fitted with zero length: {zero[:10]}", DegenerateArcWarning, stacklevel=2)
    return AuxiliaryGraph(SpeedProfile(sel.grid, sol.y), L)


def fit_auxiliary(G: TimeDependentGraph, sel: OmegaSelection, rho: float = None,
                  method: str = "auto"):
    """Build, solve and extract in one call. Returns ``(problem, solution, aux)``."""
    co = build_coefficients(G, sel)
    problem = assemble_fit_lp(co, sel.default_rho() if rho is None else rho)
    sol = solve_fit(problem, method)
    return problem, sol, extract_auxiliary(sol, sel)
