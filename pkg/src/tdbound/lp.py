"""Linear programs in solver-facing form and two ways to solve them.

``LinearProgram`` is ``min c.z  s.t.  A_eq z = b_eq,  A_ub z <= b_ub,  l <= z <= u``.
The inequality block is optional; the simplex turns it into slack columns.

``simplex`` is a dense bounded-variable primal simplex (two phases, Dantzig
pricing with a switch to Bland's rule after a run of degenerate pivots). It
is deterministic and meant for small problems. ``highs`` hands the problem
to scipy's HiGHS interior point method (with crossover to a vertex) for the
large fits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .config import TOL
from .errors import LpError, ParameterError

# dense simplex above this many matrix entries is slower than HiGHS by far
AUTO_SIMPLEX_LIMIT = 60_000


@dataclass
class LinearProgram:
    c: np.ndarray
    A_eq: object          # ndarray or scipy.sparse matrix
    b_eq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    A_ub: object = None
    b_ub: np.ndarray = None
    var_names: list = None
    row_names: list = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        nv = len(self.c)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.A_eq is None:
            self.A_eq = sp.csr_matrix((0, nv))
            self.b_eq = np.zeros(0)
        self.b_eq = np.asarray(self.b_eq, dtype=float)
        if self.A_ub is None:
            self.A_ub = sp.csr_matrix((0, nv))
            self.b_ub = np.zeros(0)
        self.b_ub = np.asarray(self.b_ub, dtype=float)
        if not np.all(np.isfinite(self.c)):
            raise ParameterError("objective coefficients must be finite")
        if self.lower.shape != (nv,) or self.upper.shape != (nv,):
            raise ParameterError("bounds must match the number of variables")
        if np.any(self.lower > self.upper):
            raise ParameterError("lower bound exceeds upper bound")
        if np.any(~np.isfinite(self.lower)):
            raise ParameterError("lower bounds must be finite")
        for name, A, b in (("A_eq", self.A_eq, self.b_eq), ("A_ub", self.A_ub, self.b_ub)):
            if A.shape != (len(b), nv):
                raise ParameterError(f"{name} has shape {A.shape}, expected {(len(b), nv)}")

    @property
    def num_vars(self) -> int:
        return len(self.c)

    @property
    def num_eq(self) -> int:
        return self.A_eq.shape[0]

    @property
    def num_ub(self) -> int:
        return self.A_ub.shape[0]

    def to_equality_form(self):
        """Dense ``(c, A, b, l, u)`` with one slack column per inequality row."""
        A_eq = _dense(self.A_eq)
        A_ub = _dense(self.A_ub)
        m_ub = self.num_ub
        A = np.block([[A_eq, np.zeros((self.num_eq, m_ub))],
                      [A_ub, np.eye(m_ub)]])
        b = np.concatenate([self.b_eq, self.b_ub])
        c = np.concatenate([self.c, np.zeros(m_ub)])
        lo = np.concatenate([self.lower, np.zeros(m_ub)])
        hi = np.concatenate([self.upper, np.full(m_ub, np.inf)])
        return c, A, b, lo, hi

    def to_text(self) -> str:
        """CPLEX-style LP text: objective, equality rows, inequality rows, bounds."""
        names = self.var_names or [f"z{k}" for k in range(self.num_vars)]
        rows = self.row_names or ([f"e{r}" for r in range(self.num_eq)]
                                  + [f"u{r}" for r in range(self.num_ub)])

        def expr(coefs, idx):
            parts = []
            for a, k in zip(coefs, idx):
                sign = "-" if a < 0 else "+"
                parts.append(f"{sign} {abs(a):.17g} {names[k]}")
            text = " ".join(parts) or "0"
            return text[2:] if text.startswith("+ ") else text

        nz = np.flatnonzero(self.c)
        out = ["Minimize", f" obj: {expr(self.c[nz], nz)}", "Subject To"]
        for r, (A, b, op) in enumerate(_row_iter(self)):
            out.append(f" {rows[r]}: {expr(A[1], A[0])} {op} {b:.17g}")
        out.append("Bounds")
        for k in range(self.num_vars):
            hi = "inf" if np.isinf(self.upper[k]) else f"{self.upper[k]:.17g}"
            out.append(f" {self.lower[k]:.17g} <= {names[k]} <= {hi}")
        out.append("End")
        return "\n".join(out) + "\n"


def _row_iter(lp):
    for A, b, op in ((lp.A_eq, lp.b_eq, "="), (lp.A_ub, lp.b_ub, "<=")):
        A = sp.csr_matrix(A)
        for r in range(A.shape[0]):
            lo, hi = A.indptr[r], A.indptr[r + 1]
            yield (A.indices[lo:hi], A.data[lo:hi]), b[r], op


def _dense(A) -> np.ndarray:
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


@dataclass
class LpResult:
    x: np.ndarray
    objective: float
    method: str
    iterations: int = 0


def solve_lp(lp: LinearProgram, method: str = "auto") -> LpResult:
    """Solve ``lp`` to optimality.

    ``method`` is ``"simplex"``, ``"highs"`` or ``"auto"`` (simplex for small
    dense problems). Raises :class:`LpError` if the problem is infeasible or
    unbounded.
    """
    if method == "auto":
        method = choose_method(lp)
    if method == "simplex":
        c, A, b, lo, hi = lp.to_equality_form()
        x, obj, its = simplex(c, A, b, lo, hi)
        return LpResult(x[:lp.num_vars], float(lp.c @ x[:lp.num_vars]), "simplex", its)
    if method == "highs":
        return _solve_highs(lp)
    raise ParameterError(f"unknown LP method {method!r}")


def choose_method(lp: LinearProgram) -> str:
    size = (lp.num_eq + lp.num_ub) * (lp.num_vars + lp.num_ub)
    return "simplex" if size <= AUTO_SIMPLEX_LIMIT else "highs"


def _solve_highs(lp: LinearProgram) -> LpResult:
    bounds = np.column_stack([lp.lower, np.where(np.isinf(lp.upper), None, lp.upper)])
    kw = {}
    if lp.num_eq:
        kw.update(A_eq=sp.csr_matrix(lp.A_eq), b_eq=lp.b_eq)
    if lp.num_ub:
        kw.update(A_ub=sp.csr_matrix(lp.A_ub), b_ub=lp.b_ub)
    res = linprog(lp.c, bounds=bounds, method="highs-ipm",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10}, **kw)
    if res.status != 0:
        raise LpError(f"HiGHS failed: {res.message}")
    return LpResult(res.x, float(res.fun), "highs", int(res.nit))


def simplex(c, A, b, lower, upper, max_iter: int = 50_000, bland_after: int = 50):
    """Bounded-variable primal simplex on ``min c.x, A x = b, lower <= x <= upper``.

    Returns ``(x, objective, iterations)``. Lower bounds must be finite;
    upper bounds may be ``inf``.
    """
    c = np.asarray(c, dtype=float)
    A = np.array(A, dtype=float)
    b = np.asarray(b, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    m, n = A.shape
    if np.any(~np.isfinite(lower)):
        raise ParameterError("simplex needs finite lower bounds")

    # shift to 0 <= x' <= u - l and make the right-hand side nonnegative
    width = upper - lower
    rhs = b - A @ lower
    neg = rhs < 0
    A[neg] *= -1
    rhs[neg] *= -1

    # columns: structural (n) then artificials (m), basis starts on artificials
    T = np.hstack([A, np.eye(m)])
    ub = np.concatenate([width, np.full(m, np.inf)])
    at_upper = np.zeros(n + m, dtype=bool)
    basis = np.arange(n, n + m)
    beta = rhs.copy()

    cost1 = np.concatenate([np.zeros(n), np.ones(m)])
    its = _iterate(T, beta, basis, at_upper, ub, cost1, n + m, max_iter, bland_after)
    if beta @ cost1[basis] > 1e-7 * max(1.0, np.abs(rhs).max(initial=0.0)):
        raise LpError("LP is infeasible")

    # drive zero-level artificials out of the basis where a structural column allows
    for r in range(m):
        if basis[r] >= n:
            cand = np.flatnonzero(np.abs(T[r, :n]) > 1e-9)
            cand = cand[~np.isin(cand, basis)]
            if len(cand):
                j = cand[0]
                beta[r] = ub[j] if at_upper[j] else 0.0
                at_upper[j] = False
                _pivot_keep_beta(T, beta, basis, r, j)
    ub[n:] = 0.0  # remaining artificials are pinned at zero

    cost2 = np.concatenate([c, np.zeros(m)])
    its += _iterate(T, beta, basis, at_upper, ub, cost2, n, max_iter, bland_after)

    x = np.where(at_upper, ub, 0.0)
    x[basis] = beta
    x = x[:n] + lower
    return x, float(c @ x), its


def _iterate(T, beta, basis, at_upper, ub, cost, n_enter, max_iter, bland_after):
    """Pivot until optimal for ``cost``; only columns ``< n_enter`` may enter."""
    tol = TOL.lp_optimality
    m = len(basis)
    degenerate_run = 0
    for it in range(max_iter):
        y = cost[basis] @ T                 # c_B B^-1 A
        d = cost - y                        # reduced costs
        d[basis] = 0.0
        d[n_enter:] = 0.0
        gain = np.where(at_upper, d, -d)    # improvement rate when moving off the bound
        gain[ub == 0.0] = 0.0               # fixed columns never enter
        eligible = np.flatnonzero(gain > tol)
        if len(eligible) == 0:
            return it
        if degenerate_run >= bland_after:
            j = int(eligible[0])
        else:
            j = int(eligible[np.argmax(gain[eligible])])
        direction = -1.0 if at_upper[j] else 1.0
        alpha = T[:, j] * direction         # basic vars change by -alpha * theta

        theta = ub[j]
        leave, leave_to_upper = -1, False
        ub_basis = ub[basis]
        for r in range(m):
            a = alpha[r]
            if a > 1e-11:
                lim = beta[r] / a
                to_upper = False
            elif a < -1e-11 and np.isfinite(ub_basis[r]):
                lim = (ub_basis[r] - beta[r]) / -a
                to_upper = True
            else:
                continue
            lim = max(lim, 0.0)
            if lim < theta - 1e-12 or (leave >= 0 and abs(lim - theta) <= 1e-12
                                       and basis[r] < basis[leave]):
                theta, leave, leave_to_upper = lim, r, to_upper
        if not np.isfinite(theta):
            raise LpError("LP is unbounded")
        degenerate_run = degenerate_run + 1 if theta <= 1e-12 else 0

        beta -= alpha * theta
        if leave < 0:
            at_upper[j] = not at_upper[j]   # bound flip, basis unchanged
            continue
        old = basis[leave]
        entering_value = (ub[j] - theta) if at_upper[j] else theta
        at_upper[old] = leave_to_upper
        at_upper[j] = False
        beta[leave] = entering_value
        _pivot_keep_beta(T, beta, basis, leave, j)
    raise LpError(f"simplex did not converge in {max_iter} iterations")


def _pivot_keep_beta(T, beta, basis, r, j):
    # beta already holds updated values, including the entering one in row r
    piv = T[r, j]
    T[r] /= piv
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])
    basis[r] = j
