"""LP solving behind a single deterministic contract.

Two interchangeable backends:

* ``"highs"`` (default) -- the HiGHS dual revised simplex shipped with scipy,
  used for production-size problems.
* ``"simplex"`` -- a bounded-variable primal revised simplex written here,
  with sparse LU plus eta-file basis updates and Bland's rule after a stall.
  Slower, but self-contained; the test-suite uses it as a cross-check.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.sparse.linalg import splu

from .lp_formulation import EQ, GE, LE, LpProblem

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: str
    values: np.ndarray
    objective: float
    iterations: int
    max_constraint_violation: float
    method: str = ""
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def solve(problem: LpProblem, method: str = "highs", feas_tol: float = 1e-7,
          opt_tol: float = 1e-7, max_iters: int = 200_000) -> LpSolution:
    if np.any(problem.lo > problem.hi):
        raise ValueError("variable bounds with lo > hi")
    t0 = time.perf_counter()
    if method == "highs":
        status, x, its = _solve_highs(problem, feas_tol, opt_tol, max_iters)
    elif method == "simplex":
        status, x, its = RevisedSimplex(problem, feas_tol, opt_tol, max_iters).run()
    else:
        raise ValueError(f"unknown method {method!r}")
    if x is None:
        x = np.full(problem.num_vars, np.nan)
        obj, viol = float("nan"), float("inf")
    else:
        if status == OPTIMAL:
            # snap round-off at the bounds so labels land exactly on them
            x = np.where(np.abs(x - problem.lo) <= feas_tol, problem.lo, x)
            x = np.where(np.abs(x - problem.hi) <= feas_tol, problem.hi, x)
        obj = float(problem.objective @ x)
        viol = problem.violation(x)
    return LpSolution(status, x, obj, its, viol, method, time.perf_counter() - t0)


def _solve_highs(problem, feas_tol, opt_tol, max_iters):
    s = np.asarray(problem.senses)
    A = problem.A.tocsr()
    le, ge, eq = s == LE, s == GE, s == EQ
    A_ub = sp.vstack([A[le], -A[ge]]).tocsr() if (le | ge).any() else None
    b_ub = np.concatenate([problem.rhs[le], -problem.rhs[ge]]) if A_ub is not None else None
    A_eq = A[eq] if eq.any() else None
    b_eq = problem.rhs[eq] if eq.any() else None
    bounds = np.stack([problem.lo, problem.hi], axis=1)
    res = linprog(problem.objective, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs-ds",
                  options={"primal_feasibility_tolerance": feas_tol,
                           "dual_feasibility_tolerance": opt_tol,
                           "maxiter": max_iters, "presolve": True})
    its = int(getattr(res, "nit", 0) or 0)
    if res.status == 0:
        return OPTIMAL, np.asarray(res.x, float), its
    if res.status == 1:
        return ITERATION_LIMIT, None if res.x is None else np.asarray(res.x, float), its
    if res.status == 2:
        return INFEASIBLE, None, its
    if res.status == 3:
        return UNBOUNDED, None, its
    raise RuntimeError(f"HiGHS failed: {res.message}")


class _Basis:
    """Sparse LU of the basis matrix with product-form (eta) updates."""

    def __init__(self, M, cols, refactor_every=64):
        self.M = M
        self.refactor_every = refactor_every
        self.factor(cols)

    def factor(self, cols):
        B = self.M[:, cols].tocsc()
        self.lu = splu(B, permc_spec="COLAMD")
        self.etas = []

    def ftran(self, a):
        x = self.lu.solve(np.asarray(a, float))
        for p, col in self.etas:
            xp = x[p] / col[p]
            x -= xp * col
            x[p] = xp
        return x

    def btran(self, c):
        y = np.array(c, float)
        for p, col in reversed(self.etas):
            # row p of E^-1 is (-col_i / col_p, ..., 1 / col_p at p)
            yp = (y[p] - (col @ y - col[p] * y[p])) / col[p]
            y[p] = yp
        return self.lu.solve(y, trans="T")

    def update(self, p, alpha):
        self.etas.append((p, alpha.copy()))
        return len(self.etas) >= self.refactor_every


class RevisedSimplex:
    """Two-phase bounded-variable primal revised simplex.

    Pricing is Dantzig's rule with ties to the lowest column index; after
    ``stall_limit`` iterations without objective progress it switches to
    Bland's rule (lowest eligible index, lowest leaving index) until the
    objective moves again, which rules out cycling.
    """

    def __init__(self, problem: LpProblem, feas_tol=1e-7, opt_tol=1e-7,
                 max_iters=200_000, stall_limit=50, pivot_tol=1e-9):
        self.p = problem
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.max_iters = max_iters
        self.stall_limit = stall_limit
        self.pivot_tol = pivot_tol
        self.iterations = 0

    def _setup(self):
        p = self.p
        nv, nr = p.num_vars, p.num_rows
        s = np.asarray(p.senses)
        slack_sign = np.where(s == GE, -1.0, 1.0)
        slack_hi = np.where(s == EQ, 0.0, np.inf)

        lo = np.concatenate([p.lo, np.zeros(nr)])
        hi = np.concatenate([p.hi, slack_hi])
        x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
        M = sp.hstack([p.A, sp.diags(slack_sign)]).tocsc()
        res = p.rhs - p.A @ x[:nv]
        slack_val = res * slack_sign
        ok = (slack_val >= -self.feas_tol) & (slack_val <= slack_hi + self.feas_tol)

        art_rows = np.flatnonzero(~ok)
        art_sign = np.where(res[art_rows] >= 0, 1.0, -1.0)
        na = art_rows.size
        if na:
            Art = sp.csc_matrix((art_sign, (art_rows, np.arange(na))), shape=(nr, na))
            M = sp.hstack([M, Art]).tocsc()
        lo = np.concatenate([lo, np.zeros(na)])
        hi = np.concatenate([hi, np.full(na, np.inf)])
        x = np.concatenate([x, np.zeros(na)])

        basis = np.empty(nr, np.int64)
        slack_cols = nv + np.arange(nr)
        basis[ok] = slack_cols[ok]
        x[slack_cols[ok]] = np.clip(slack_val[ok], 0.0, slack_hi[ok])
        basis[art_rows] = nv + nr + np.arange(na)
        x[nv + nr:] = np.abs(res[art_rows])
        self.M, self.lo, self.hi, self.x = M, lo, hi, x
        self.basis = basis
        self.is_basic = np.zeros(M.shape[1], bool)
        self.is_basic[basis] = True
        self.n_art = na
        self.n_struct = nv
        self.B = _Basis(M, basis)

    def _recompute_basic(self):
        xn = np.where(self.is_basic, 0.0, self.x)
        self.x[self.basis] = self.B.ftran(self.p.rhs - self.M @ xn)

    def _phase(self, cost):
        """Run simplex iterations on ``cost``; returns a status string."""
        best = np.inf
        stalled = 0
        lo, hi = self.lo, self.hi
        MT = self.M.T.tocsr()
        while True:
            if self.iterations >= self.max_iters:
                return ITERATION_LIMIT
            y = self.B.btran(cost[self.basis])
            d = cost - MT @ y
            at_lo = self.x <= lo + self.feas_tol
            at_hi = self.x >= hi - self.feas_tol
            movable = hi > lo
            free = ~at_lo & ~at_hi
            elig = ~self.is_basic & movable & (
                (at_lo & (d < -self.opt_tol)) | (at_hi & ~at_lo & (d > self.opt_tol))
                | (free & (np.abs(d) > self.opt_tol)))
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                return OPTIMAL
            bland = stalled >= self.stall_limit
            q = int(cand[0]) if bland else int(cand[np.argmax(np.abs(d[cand]))])
            delta = 1.0 if d[q] < 0 else -1.0

            alpha = self.B.ftran(self.M[:, q].toarray().ravel())
            g = delta * alpha
            xb = self.x[self.basis]
            lb, ub = lo[self.basis], hi[self.basis]
            ratio = np.full(g.size, np.inf)
            dec = g > self.pivot_tol
            inc = g < -self.pivot_tol
            ratio[dec] = (xb[dec] - lb[dec]) / g[dec]
            ratio[inc] = (ub[inc] - xb[inc]) / -g[inc]
            ratio = np.maximum(ratio, 0.0)
            theta = ratio.min(initial=np.inf)
            flip = hi[q] - lo[q]
            if min(theta, flip) == np.inf:
                return UNBOUNDED

            self.iterations += 1
            if flip <= theta:
                self.x[q] += delta * flip
                self.x[self.basis] -= flip * g
            else:
                ties = np.flatnonzero(ratio <= theta + 1e-12)
                if bland:
                    r = int(ties[np.argmin(self.basis[ties])])
                else:
                    r = int(ties[np.argmax(np.abs(g[ties]))])
                leaving = self.basis[r]
                self.x[q] += delta * theta
                self.x[self.basis] -= theta * g
                self.x[leaving] = lo[leaving] if g[r] > 0 else hi[leaving]
                self.basis[r] = q
                self.is_basic[leaving] = False
                self.is_basic[q] = True
                if self.B.update(r, alpha) or abs(alpha[r]) < 1e-7:
                    self.B.factor(self.basis)
                    self._recompute_basic()

            obj = float(cost @ self.x)
            if obj < best - 1e-12:
                best = obj
                stalled = 0
            else:
                stalled += 1

    def run(self):
        self._setup()
        nv = self.n_struct
        total = self.M.shape[1]
        if self.n_art:
            c1 = np.zeros(total)
            c1[total - self.n_art:] = 1.0
            status = self._phase(c1)
            if status != OPTIMAL:
                return status, None, self.iterations
            if self.x[total - self.n_art:].sum() > self.feas_tol * max(1, self.n_art):
                return INFEASIBLE, None, self.iterations
            # artificials may stay basic at zero but can never grow again
            self.hi[total - self.n_art:] = 0.0
            self.x[total - self.n_art:] = 0.0
            self._recompute_basic()
        c2 = np.zeros(total)
        c2[:nv] = self.p.objective
        status = self._phase(c2)
        self.B.factor(self.basis)
        self._recompute_basic()
        if status == UNBOUNDED:
            return status, None, self.iterations
        return status, self.x[:nv].copy(), self.iterations
