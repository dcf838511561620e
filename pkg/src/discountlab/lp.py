"""Dense linear programming kernel.

A small two-phase primal simplex on the standard form

    min c.x   s.t.   A x = b,  x >= 0,

with free variables split into differences of nonnegative parts and
inequality rows slacked.  Dantzig pricing runs first; after
2 * (rows + cols) iterations the kernel switches to Bland's least-index
rule, which guarantees termination.  Every Optimal return is certified:
the final point is re-solved from the final basis, and the primal
feasibility and complementary slackness residuals are checked against
fixed bounds before the solution is handed back.

Problems here are desk scale (a few hundred rows and columns), where a
dense tableau is simpler and faster than anything clever, and exact
vertex answers feed the basis enumeration used as an independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, islice
from typing import Optional

import numpy as np

from .errors import NumericalBreakdown

FEAS_TOL = 1e-9
CS_TOL = 1e-8
PIVOT_TOL = 1e-12
OPT_TOL = 1e-9
REFACTOR_EVERY = 150

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"


@dataclass
class LPProblem:
    """min c.x subject to row senses ('=' or '<=') and x >= 0 unless free."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    senses: list
    free: Optional[np.ndarray] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        rows, cols = self.A.shape
        if self.c.shape != (cols,) or self.b.shape != (rows,):
            raise ValueError("inconsistent LP dimensions")
        if len(self.senses) != rows:
            raise ValueError("one sense per row required")
        if any(s not in ("=", "<=") for s in self.senses):
            raise ValueError("senses must be '=' or '<='")
        if self.free is None:
            self.free = np.zeros(cols, dtype=bool)
        else:
            self.free = np.asarray(self.free, dtype=bool)
            if self.free.shape != (cols,):
                raise ValueError("free flags must match column count")


@dataclass
class LPSolution:
    status: str
    x: Optional[np.ndarray]
    objective_value: float
    dual: Optional[np.ndarray]
    iterations: int
    feasibility_residual: float = math.nan
    slackness_residual: float = math.nan
    ray: Optional[np.ndarray] = None


def lp_solve(problem: LPProblem, max_iterations: Optional[int] = None) -> LPSolution:
    """Two-phase dense primal simplex with certified returns."""
    std = _Standardized(problem)
    m, n = std.A.shape
    budget = max_iterations or (200 * (m + n) + 20000)
    bland_after = 2 * (m + n)
    state = _Tableau(std.A, std.b, std.basis, bland_after)

    iterations = 0
    if std.needs_phase1:
        cost1 = np.zeros(std.A.shape[1])
        cost1[std.artificial] = 1.0
        status, iterations = state.run(cost1, budget)
        if status == UNBOUNDED:
            raise NumericalBreakdown("phase 1 reported unbounded")
        if state.objective(cost1) > FEAS_TOL:
            return LPSolution(INFEASIBLE, None, math.nan, None, iterations)
        state.purge_artificials(std.artificial)

    status, it2 = state.run(std.c, budget, start_iter=iterations)
    iterations = it2
    if status == UNBOUNDED:
        ray = std.to_original(state.ray)
        return LPSolution(UNBOUNDED, None, -math.inf, None, iterations, ray=ray)

    x_std, y_kept = state.certify(std.A, std.b, std.c)
    x = std.to_original(x_std)
    dual = std.dual_to_original(y_kept, state.kept_rows)
    feas = _primal_residual(problem, x)
    cs = _slack_residual(std, x_std, y_kept, state.kept_rows)
    if feas > FEAS_TOL or cs > CS_TOL:
        raise NumericalBreakdown(
            f"certification failed: feasibility {feas:.3e}, slackness {cs:.3e}")
    obj = float(problem.c @ x)
    return LPSolution(OPTIMAL, x, obj, dual, iterations,
                      feasibility_residual=feas, slackness_residual=cs)


class _Standardized:
    """Original problem mapped to equality standard form."""

    def __init__(self, p: LPProblem):
        rows, cols = p.A.shape
        col_blocks = []
        c_blocks = []
        self.var_map = []   # (orig_index, sign)
        for j in range(cols):
            col_blocks.append(p.A[:, j:j + 1])
            c_blocks.append(p.c[j])
            self.var_map.append((j, 1.0))
            if p.free[j]:
                col_blocks.append(-p.A[:, j:j + 1])
                c_blocks.append(-p.c[j])
                self.var_map.append((j, -1.0))
        A = np.hstack(col_blocks)
        c = np.array(c_blocks, dtype=float)
        b = p.b.astype(float).copy()

        slack_of_row = {}
        slack_cols = []
        for r in range(rows):
            if p.senses[r] == "<=":
                col = np.zeros((rows, 1))
                col[r, 0] = 1.0
                slack_of_row[r] = A.shape[1] + len(slack_cols)
                slack_cols.append(col)
        if slack_cols:
            A = np.hstack([A] + slack_cols)
            c = np.concatenate([c, np.zeros(len(slack_cols))])

        self.row_sign = np.ones(rows)
        for r in range(rows):
            if b[r] < 0.0:
                A[r] *= -1.0
                b[r] *= -1.0
                self.row_sign[r] = -1.0

        basis = np.full(rows, -1, dtype=int)
        for r, j in slack_of_row.items():
            if self.row_sign[r] > 0:
                basis[r] = j
        need_art = np.nonzero(basis < 0)[0]
        self.artificial = np.zeros(A.shape[1] + len(need_art), dtype=bool)
        if len(need_art):
            art_cols = np.zeros((rows, len(need_art)))
            for k, r in enumerate(need_art):
                art_cols[r, k] = 1.0
                basis[r] = A.shape[1] + k
                self.artificial[A.shape[1] + k] = True
            A = np.hstack([A, art_cols])
            c = np.concatenate([c, np.zeros(len(need_art))])
        self.needs_phase1 = bool(len(need_art))
        self.A, self.b, self.c, self.basis = A, b, c, basis
        self.n_orig = cols

    def to_original(self, x_std) -> np.ndarray:
        x = np.zeros(self.n_orig)
        for k, (j, sign) in enumerate(self.var_map):
            x[j] += sign * x_std[k]
        return x

    def dual_to_original(self, y_kept, kept_rows) -> np.ndarray:
        y = np.zeros(len(self.row_sign))
        for pos, r in enumerate(kept_rows):
            y[r] = self.row_sign[r] * y_kept[pos]
        return y


class _Tableau:
    """Dense simplex tableau over a fixed standard-form matrix.

    The tableau is refactorized from the original matrix every
    ``REFACTOR_EVERY`` pivots and before any optimality verdict, so
    accumulated pivot drift can neither stall Bland's rule on noise
    reduced costs nor produce a false optimum.
    """

    def __init__(self, A, b, basis, bland_after):
        self.A0 = A.astype(float).copy()
        self.b0 = b.astype(float).copy()
        self.T = A.astype(float).copy()
        self.rhs = b.astype(float).copy()
        self.basis = basis.astype(int).copy()
        self.bland_after = bland_after
        self.kept_rows = np.arange(A.shape[0])
        self.ray = None
        self.pivots_since_refactor = 0
        self._reduce_to_basis()

    def _reduce_to_basis(self):
        for r in range(len(self.basis)):
            piv = self.T[r, self.basis[r]]
            if abs(piv - 1.0) > 1e-14 or np.any(
                    np.abs(np.delete(self.T[:, self.basis[r]], r)) > 1e-14):
                self._pivot(r, self.basis[r])

    def _pivot(self, row, col):
        piv = self.T[row, col]
        self.T[row] /= piv
        self.rhs[row] /= piv
        factors = self.T[:, col].copy()
        factors[row] = 0.0
        self.T -= np.outer(factors, self.T[row])
        self.rhs -= factors * self.rhs[row]
        self.T[:, col] = 0.0
        self.T[row, col] = 1.0
        self.basis[row] = col
        self.pivots_since_refactor += 1

    def refactor(self):
        """Rebuild the tableau from the original data on the current basis."""
        B = self.A0[:, self.basis]
        try:
            self.T = np.linalg.solve(B, self.A0)
            self.rhs = np.linalg.solve(B, self.b0)
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown(f"refactorization failed: {exc}")
        for r, col in enumerate(self.basis):
            self.T[:, col] = 0.0
            self.T[r, col] = 1.0
        if float(np.min(self.rhs, initial=0.0)) < -FEAS_TOL:
            raise NumericalBreakdown("refactorization lost feasibility")
        np.maximum(self.rhs, 0.0, out=self.rhs)
        self.pivots_since_refactor = 0

    def objective(self, c):
        return float(c[self.basis] @ self.rhs)

    def run(self, c, budget, start_iter=0):
        it = start_iter
        while True:
            if self.pivots_since_refactor >= REFACTOR_EVERY:
                self.refactor()
            red = c - c[self.basis] @ self.T
            red[self.basis] = 0.0
            if it >= self.bland_after:
                negs = np.nonzero(red < -OPT_TOL)[0]
                enter = int(negs[0]) if len(negs) else -1
            else:
                cand = int(np.argmin(red))
                enter = cand if red[cand] < -OPT_TOL else -1
            if enter < 0:
                if self.pivots_since_refactor == 0:
                    return OPTIMAL, it
                self.refactor()
                continue
            col = self.T[:, enter]
            eligible = np.nonzero(col > 1e-9)[0]
            if len(eligible) == 0:
                eligible = np.nonzero(col > PIVOT_TOL)[0]
            if len(eligible) == 0:
                self.ray = self._ray(enter)
                return UNBOUNDED, it
            ratios = self.rhs[eligible] / col[eligible]
            best = np.min(ratios)
            ties = eligible[ratios <= best + 1e-12]
            if it >= self.bland_after:
                leave = int(ties[np.argmin(self.basis[ties])])
            else:
                leave = int(ties[np.argmax(col[ties])])
            if col[leave] < PIVOT_TOL:
                raise NumericalBreakdown("pivot below tolerance under Bland's rule")
            self._pivot(leave, enter)
            it += 1
            if it - start_iter > budget:
                raise NumericalBreakdown(
                    f"simplex exceeded {budget} iterations")

    def _ray(self, enter):
        d = np.zeros(self.T.shape[1])
        d[enter] = 1.0
        d[self.basis] = -self.T[:, enter]
        return d

    def purge_artificials(self, artificial):
        """Pivot zero-level artificials out of the basis, dropping rows
        whose non-artificial entries are all zero (redundant rows)."""
        drop = []
        for r in range(len(self.basis)):
            if not artificial[self.basis[r]]:
                continue
            row = np.where(artificial, 0.0, np.abs(self.T[r]))
            best = int(np.argmax(row))
            if row[best] > 1e-7:
                self._pivot(r, best)
            else:
                drop.append(r)
        if drop:
            keep = np.setdiff1d(np.arange(len(self.basis)), drop)
            self.T = self.T[keep]
            self.rhs = self.rhs[keep]
            self.basis = self.basis[keep]
            self.kept_rows = self.kept_rows[keep]
            self.A0 = self.A0[keep]
            self.b0 = self.b0[keep]
        # artificials never price back in
        self.T[:, artificial] = 0.0
        self.A0[:, artificial] = 0.0

    def certify(self, A, b, c):
        """Fresh solve on the final basis: clean primal point and duals."""
        B = A[np.ix_(self.kept_rows, self.basis)]
        try:
            xB = np.linalg.solve(B, b[self.kept_rows])
            y = np.linalg.solve(B.T, c[self.basis])
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown(f"final basis is singular: {exc}")
        x = np.zeros(A.shape[1])
        x[self.basis] = xB
        return x, y


def _primal_residual(p: LPProblem, x: np.ndarray) -> float:
    res = p.A @ x - p.b
    worst = 0.0
    for r, s in enumerate(p.senses):
        worst = max(worst, abs(res[r]) if s == "=" else max(0.0, res[r]))
    bound = np.min(x[~p.free], initial=0.0)
    return max(worst, -min(bound, 0.0))


def _slack_residual(std: _Standardized, x_std, y_kept, kept_rows) -> float:
    A = std.A[kept_rows]
    red = std.c - A.T @ y_kept
    comp = float(np.max(np.abs(x_std * red), initial=0.0))
    return comp


# ---------------------------------------------------------------------------
# basis enumeration (independent oracle)
# ---------------------------------------------------------------------------

def independent_rows(A: np.ndarray, b: Optional[np.ndarray] = None,
                     tol: float = 1e-9):
    """Select a maximal independent row subset (b filtered alongside)."""
    A = np.asarray(A, dtype=float)
    kept = []
    rank = 0
    for r in range(A.shape[0]):
        trial = A[kept + [r]]
        if np.linalg.matrix_rank(trial, tol=tol) > rank:
            kept.append(r)
            rank += 1
    Ar = A[kept]
    if b is None:
        return Ar, kept
    return Ar, np.asarray(b, dtype=float)[kept], kept


def enumerate_basic_solutions(A: np.ndarray, b: np.ndarray,
                              tol: float = 1e-9,
                              max_bases: int = 3_000_000,
                              chunk: int = 65536):
    """All basic feasible solutions of {A x = b, x >= 0}.

    Rows are reduced to an independent subset first, then every
    size-rank column subset is solved in vectorized chunks; singular and
    near-singular bases are rejected by determinant and residual checks.
    Returns the raw vertex list (duplicates from degenerate bases
    included; callers deduplicate).
    """
    A, b, _ = independent_rows(A, b)
    r, n = A.shape
    if math.comb(n, r) > max_bases:
        raise ValueError(f"enumeration too large: C({n},{r}) bases")
    vertices = []
    combos = combinations(range(n), r)
    while True:
        block = np.fromiter(
            (c for cols in islice(combos, chunk)
             for c in cols), dtype=int)
        if block.size == 0:
            break
        block = block.reshape(-1, r)
        B = np.swapaxes(A[:, block], 0, 1)      # (batch, r, r)
        dets = np.abs(np.linalg.det(B))
        # Hadamard-normalized singularity test: robust to row scaling
        hadamard = np.prod(np.linalg.norm(B, axis=2), axis=1)
        ok = dets > 1e-12 * np.maximum(hadamard, 1e-300)
        if not np.any(ok):
            continue
        Bok = B[ok]
        rhs = np.broadcast_to(b, (int(ok.sum()), r))[..., None]
        xB = np.linalg.solve(Bok, rhs)[..., 0]
        resid = np.abs(np.einsum("kij,kj->ki", Bok, xB) - b)
        row_scale = 1.0 + np.abs(b) + np.linalg.norm(Bok, axis=2) \
            * np.max(np.abs(xB), axis=1, keepdims=True)
        feas = (np.min(xB, axis=1) >= -tol) \
            & (np.max(resid / row_scale, axis=1) <= 1e-9)
        good_cols = block[ok][feas]
        good_x = xB[feas]
        for cols, xb in zip(good_cols, good_x):
            x = np.zeros(n)
            x[cols] = np.maximum(xb, 0.0)
            vertices.append(x)
    return vertices


def enumeration_minimum(A, b, c, tol: float = 1e-9):
    """min c.x over basic feasible solutions, or None when infeasible."""
    verts = enumerate_basic_solutions(A, b, tol=tol)
    if not verts:
        return None, None
    values = [float(np.asarray(c) @ v) for v in verts]
    k = int(np.argmin(values))
    return values[k], verts[k]
