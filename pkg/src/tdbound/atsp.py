"""Exact asymmetric TSP by branch-and-bound on the assignment relaxation.

Vertex 0 is the depot. A tour is the order in which customers ``1..n`` are
visited; the cost includes the legs from and back to the depot.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linear_sum_assignment, milp
from scipy.sparse import coo_matrix, csr_matrix, vstack

from .config import MAX_ATSP_VERTICES, MAX_BRUTE_FORCE_CUSTOMERS, TOL
from .errors import CapacityError, DomainError, InfeasibleError


def as_cost_matrix(c) -> np.ndarray:
    """Validated float copy of ``c`` with an infinite diagonal."""
    c = np.array(c, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1] or len(c) < 2:
        raise DomainError("cost matrix must be square with at least 2 vertices")
    np.fill_diagonal(c, np.inf)
    off = ~np.eye(len(c), dtype=bool)
    if not np.all(np.isfinite(c[off])) or np.any(c[off] < 0):
        raise DomainError("off-diagonal costs must be finite and nonnegative")
    return c


def tour_cost(c, order) -> float:
    cost = 0.0
    prev = 0
    for v in order:
        cost += c[prev][v]
        prev = v
    return float(cost + c[prev][0])


@dataclass(frozen=True)
class AtspSolution:
    tour: tuple
    cost: float
    nodes_explored: int = 0
    optimal: bool = True


def hungarian(a) -> tuple[np.ndarray, float]:
    """Min-cost perfect assignment by shortest augmenting paths with potentials.

    ``a`` may contain ``inf`` for forbidden pairs. Returns ``(perm, cost)`` with
    row ``i`` assigned to column ``perm[i]``.
    """
    a = np.asarray(a, dtype=float)
    n = len(a)
    finite = np.isfinite(a)
    if np.any(~finite.any(axis=1)) or np.any(~finite.any(axis=0)):
        raise InfeasibleError("a row or column has no finite entry")
    # forbidden pairs cost more than any assignment of finite entries
    big = 2.0 * n * (np.abs(a[finite]).max() + 1.0)
    w = np.where(finite, a, big)

    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    owner = np.zeros(n + 1, dtype=int)     # owner[j]: 1-based row matched to column j
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = owner[j0]
            free = ~used
            free[0] = False
            reduced = w[i0 - 1] - u[i0] - v[1:]
            better = free[1:] & (reduced < minv[1:])
            minv[1:][better] = reduced[better]
            way[1:][better] = j0
            cand = np.where(free[1:], minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[owner[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    perm = np.empty(n, dtype=int)
    perm[owner[1:] - 1] = np.arange(n)
    if not np.all(finite[np.arange(n), perm]):
        raise InfeasibleError("no assignment avoids the forbidden pairs")
    return perm, float(a[np.arange(n), perm].sum())


def _scipy_assignment(a) -> tuple[np.ndarray, float]:
    try:
        rows, cols = linear_sum_assignment(a)
    except ValueError as exc:
        raise InfeasibleError(str(exc)) from None
    return cols, float(a[rows, cols].sum())


def solve_assignment(c, method: str = "hungarian") -> tuple[np.ndarray, float]:
    """Assignment relaxation: each vertex gets exactly one successor, self-loops forbidden."""
    a = np.array(c, dtype=float)
    np.fill_diagonal(a, np.inf)
    if method == "hungarian":
        return hungarian(a)
    if method == "scipy":
        return _scipy_assignment(a)
    raise DomainError(f"unknown assignment method {method!r}")


def cycles_of(perm) -> list[list[int]]:
    """Cycles of a successor permutation, each starting at its smallest vertex."""
    seen = np.zeros(len(perm), dtype=bool)
    out = []
    for s in range(len(perm)):
        if seen[s]:
            continue
        cyc = []
        v = s
        while not seen[v]:
            seen[v] = True
            cyc.append(v)
            v = int(perm[v])
        out.append(cyc)
    return out


def _restricted(c, included, excluded):
    m = c.copy()
    for i, j in excluded:
        m[i, j] = np.inf
    succ = dict(included)
    for i, j in included:
        keep = m[i, j]
        m[i, :] = np.inf
        m[:, j] = np.inf
        m[i, j] = keep
    # forbid closing a chain of forced arcs into a premature cycle
    has_pred = {j for _, j in included}
    for start in succ:
        if start in has_pred:
            continue
        end, length = start, 1
        while end in succ:
            end = succ[end]
            length += 1
        if length < len(c):
            m[end, start] = np.inf
    return m


BNB_MAX_VERTICES = 12


def solve_atsp(c, method: str = "auto", assignment: str = "scipy") -> AtspSolution:
    """Optimal tour for cost matrix ``c``.

    ``method`` is ``"bnb"`` (assignment branch-and-bound), ``"cuts"``
    (assignment MILP with subtour cuts) or ``"auto"``, which uses
    branch-and-bound up to ``BNB_MAX_VERTICES`` vertices and cuts above.
    """
    c = as_cost_matrix(c)
    if len(c) > MAX_ATSP_VERTICES:
        raise CapacityError(f"ATSP with {len(c)} vertices exceeds the guard of {MAX_ATSP_VERTICES}")
    if method == "auto":
        method = "bnb" if len(c) <= BNB_MAX_VERTICES else "cuts"
    if method == "bnb":
        return atsp_branch_and_bound(c, assignment)
    if method == "cuts":
        return atsp_subtour_cuts(c)
    raise DomainError(f"unknown ATSP method {method!r}")


def atsp_branch_and_bound(c, assignment: str = "scipy") -> AtspSolution:
    """Optimal tour by best-first branch-and-bound.

    Each node solves the assignment relaxation. If that is not a single
    cycle, the subtour with the fewest free arcs is broken: child ``k``
    forbids its ``k``-th free arc and forces the free arcs before it.
    Nodes are expanded by lowest bound, deeper first on ties, so the first
    node whose relaxation is a tour is optimal.
    """
    c = as_cost_matrix(c)
    N = len(c)
    if N == 2:
        return AtspSolution((1,), tour_cost(c, (1,)), 1)

    def relax(inc, exc):
        return solve_assignment(_restricted(c, inc, exc), assignment)

    counter = itertools.count()
    perm, bound = relax((), ())
    heap = [(bound, 0, next(counter), (), (), perm)]
    nodes = 0
    while heap:
        bound, negdepth, _, inc, exc, perm = heapq.heappop(heap)
        nodes += 1
        cycles = cycles_of(perm)
        if len(cycles) == 1:
            order = _order_from_perm(perm)
            return AtspSolution(order, tour_cost(c, order), nodes)
        inc_set = set(inc)

        def free_arcs(cyc):
            return [(a, int(perm[a])) for a in cyc if (a, int(perm[a])) not in inc_set]

        target = min(cycles, key=lambda cyc: (len(free_arcs(cyc)), cyc[0]))
        free = free_arcs(target)
        for k, arc in enumerate(free):
            child_inc = inc + tuple(free[:k])
            child_exc = exc + (arc,)
            try:
                child_perm, child_bound = relax(child_inc, child_exc)
            except InfeasibleError:
                continue
            heapq.heappush(heap, (child_bound, negdepth - 1, next(counter),
                                  child_inc, child_exc, child_perm))
    raise InfeasibleError("no Hamiltonian tour exists")


def _order_from_perm(perm) -> tuple:
    order = []
    v = int(perm[0])
    while v != 0:
        order.append(v)
        v = int(perm[v])
    return tuple(order)


def atsp_subtour_cuts(c) -> AtspSolution:
    """Optimal tour by repeatedly solving the integer assignment problem.

    Every subtour in the current solution gets a cut
    ``sum(x_ij for i, j in S) <= |S| - 1``; the first solution that is a
    single cycle is optimal because each round solves a relaxation of the
    ATSP exactly. ``nodes_explored`` counts the rounds.
    """
    c = as_cost_matrix(c)
    N = len(c)
    if N == 2:
        return AtspSolution((1,), tour_cost(c, (1,)), 1)
    src, dst = np.nonzero(~np.eye(N, dtype=bool))
    m = len(src)
    cost = c[src, dst]
    cols = np.arange(m)
    degree = coo_matrix((np.ones(2 * m), (np.concatenate([src, N + dst]), np.concatenate([cols, cols]))),
                        shape=(2 * N, m)).tocsr()
    rows, upper = [degree], [np.ones(2 * N)]
    lower = [np.ones(2 * N)]
    for rounds in range(1, 10 * N * N):
        res = milp(cost, integrality=np.ones(m), bounds=Bounds(0, 1),
                   constraints=LinearConstraint(vstack(rows).tocsr(), np.concatenate(lower),
                                                np.concatenate(upper)))
        if res.status != 0 or res.x is None:
            raise InfeasibleError(f"assignment MILP failed: {res.message}")
        chosen = res.x > 0.5
        perm = np.empty(N, dtype=int)
        perm[src[chosen]] = dst[chosen]
        cycles = cycles_of(perm)
        if len(cycles) == 1:
            order = _order_from_perm(perm)
            return AtspSolution(order, tour_cost(c, order), rounds)
        for cyc in cycles:
            inside = np.zeros(N, dtype=bool)
            inside[cyc] = True
            rows.append(csr_matrix((inside[src] & inside[dst]).astype(float)))
            lower.append([-np.inf])
            upper.append([len(cyc) - 1])
    raise InfeasibleError("subtour elimination did not converge")


def brute_force_atsp(c) -> AtspSolution:
    """Enumerate every tour; the lexicographically first optimum wins."""
    c = as_cost_matrix(c)
    n = len(c) - 1
    if n > MAX_BRUTE_FORCE_CUSTOMERS:
        raise CapacityError(f"brute force limited to {MAX_BRUTE_FORCE_CUSTOMERS} customers")
    best, best_cost, count = None, np.inf, 0
    for order in itertools.permutations(range(1, n + 1)):
        count += 1
        cost = tour_cost(c, order)
        if cost < best_cost:
            best, best_cost = order, cost
    return AtspSolution(tuple(best), best_cost, count)


def costs_tie(a: float, b: float) -> bool:
    return abs(a - b) <= TOL.cost * max(1.0, abs(a), abs(b))
