"""Exact TDTSP solvers for small instances.

Under FIFO, arriving earlier at the last vertex of a partial tour never
hurts, so the earliest arrival per (visited set, last vertex) is enough
state for an exact dynamic program.
"""
from __future__ import annotations

import numpy as np

from .config import MAX_BRUTE_FORCE_CUSTOMERS, MAX_EXACT_CUSTOMERS
from .errors import CapacityError, FifoViolationError
from .tdgraph import TimeDependentGraph, eval_travel_time, validate_fifo


def _require_fifo(G: TimeDependentGraph):
    bad = [a for a, f in G.arcs.items() if validate_fifo(f)]
    if bad:
        raise FifoViolationError(f"earliest-arrival dominance needs FIFO; violated on {bad[:5]}")


def solve_tdtsp_exact(G: TimeDependentGraph) -> tuple[tuple, float]:
    """Least-duration tour leaving the depot at time 0.

    Ties between predecessors go to the smallest vertex index.
    """
    n = G.n
    if n > MAX_EXACT_CUSTOMERS:
        raise CapacityError(f"exact DP limited to {MAX_EXACT_CUSTOMERS} customers, got {n}")
    _require_fifo(G)
    full = (1 << n) - 1
    # customer c is bit c-1; arrival[mask, c-1] is the earliest arrival at c
    arrival = np.full((1 << n, n), np.inf)
    parent = np.full((1 << n, n), -1, dtype=np.int64)
    for c in range(1, n + 1):
        arrival[1 << (c - 1), c - 1] = eval_travel_time(G.arcs[0, c], 0.0)

    popcount = np.array([bin(m).count("1") for m in range(1 << n)])
    for size in range(1, n):
        layer = np.flatnonzero(popcount == size)
        for j in range(1, n + 1):
            bit = 1 << (j - 1)
            masks = layer[(layer & bit) == 0]
            if len(masks) == 0:
                continue
            cand = np.full((n, len(masks)), np.inf)
            for i in range(1, n + 1):
                has_i = (masks & (1 << (i - 1))) != 0
                if not has_i.any():
                    continue
                t = arrival[masks[has_i], i - 1]
                cand[i - 1, has_i] = t + eval_travel_time(G.arcs[i, j], t)
            best = np.argmin(cand, axis=0)
            arrival[masks | bit, j - 1] = cand[best, np.arange(len(masks))]
            parent[masks | bit, j - 1] = best + 1

    t = arrival[full]
    back = np.array([t[c - 1] + eval_travel_time(G.arcs[c, 0], t[c - 1]) for c in range(1, n + 1)])
    last = int(np.argmin(back)) + 1
    duration = float(back[last - 1])

    order = []
    mask, v = full, last
    while v > 0:
        order.append(v)
        prev = int(parent[mask, v - 1])
        mask ^= 1 << (v - 1)
        v = prev
    return tuple(reversed(order)), duration


def brute_force_tdtsp(G: TimeDependentGraph) -> tuple[tuple, float]:
    """Enumerate all tours depth-first in lexicographic order; first optimum wins."""
    n = G.n
    if n > MAX_BRUTE_FORCE_CUSTOMERS:
        raise CapacityError(f"brute force limited to {MAX_BRUTE_FORCE_CUSTOMERS} customers")
    arcs = G.arcs
    best = [None, np.inf]
    order = []
    remaining = list(range(1, n + 1))

    def extend(last, z):
        if not remaining:
            total = z + eval_travel_time(arcs[last, 0], z)
            if total < best[1]:
                best[0], best[1] = tuple(order), total
            return
        for k, v in enumerate(list(remaining)):
            del remaining[k]
            order.append(v)
            extend(v, z + eval_travel_time(arcs[last, v], z))
            order.pop()
            remaining.insert(k, v)

    extend(0, 0.0)
    return best[0], float(best[1])
