"""Solvers for the discounted discrete system and the ergodic problem.

The discounted system has a unique solution for every lam > 0 because
each per-policy operator is a strictly diagonally dominant M-matrix.
Two independent routes compute it:

* ``value_iterate``: lexicographic Gauss-Seidel sweeps where each state
  is solved exactly.  At a state, every control's relation is affine and
  strictly increasing in u_i(x), so the max-relation has the unique zero
  t* = min_a q_a / s_a with s_a the control's diagonal coefficient and
  q_a its frozen right-hand side.
* ``policy_iterate``: Howard's alternation of exact policy evaluation
  (a dense linear solve) and greedy improvement, with ties broken to the
  lowest control index.  Evaluated values decrease monotonically in the
  min-cost orientation used here.

The ergodic suite looks for (c, u) with H_discrete[u] = c.  One sweep of
the map T freezes the coupling slot at the current u, solves the
uncoupled scalar systems

    lam*v_i(x) + max_a [ xi_a . D_h v_i(x) + eta_a . u(x) - L_i(x,a) ]
        = lam*u_i(x),

and normalizes Tu = v - min v.  A fixed point of T solves the ergodic
system exactly with c = -lam * min v; existence does not come with an
iteration guarantee, so the damped iteration reports failure instead of
accepting a stalled run.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .discretize import (ControlSet, DiscreteSystem, ModeControls, Policy,
                         ValueField, bellman_policy, bellman_residual,
                         control_values, drift_stencil, policy_cost,
                         policy_matrix)
from .errors import (BadValue, NoConvergence, NotASubsolution,
                     NotASupersolution, SingularSystem)

DENSE_LIMIT = 2000
SIGN_TOL = 1e-12


@dataclass
class SolveDiagnostics:
    iterations: int
    final_residual: float
    contraction_estimate: float
    wall_time: float

    def to_dict(self):
        return {"iterations": self.iterations,
                "final_residual": self.final_residual,
                "contraction_estimate": self.contraction_estimate,
                "wall_time": self.wall_time}

    def to_json(self):
        return json.dumps(self.to_dict())


@dataclass
class ErgodicResult:
    c: np.ndarray
    u: ValueField
    outer_iterations: int
    residual: float

    def to_dict(self):
        return {"c": self.c.tolist(), "u": self.u.tolist(),
                "residual": self.residual,
                "outer_iterations": self.outer_iterations}

    def to_json(self):
        return json.dumps(self.to_dict())


def value_iterate(sys: DiscreteSystem, lam: float, u0: Optional[ValueField],
                  tol: float, max_iter: int = 20000):
    """Gauss-Seidel sweeps with exact per-state solves.

    Stops when the sup norm of the Bellman residual falls below tol.
    """
    if lam <= 0.0 or tol <= 0.0:
        raise BadValue("value_iterate requires lam > 0 and tol > 0")
    S = sys.num_states
    u = np.zeros((sys.m, S)) if u0 is None else np.array(u0, dtype=float)
    start = time.perf_counter()

    # frozen per-control data: s_a, upwind gathers, off-mode couplings
    per_mode = []
    for i in range(sys.m):
        mc = sys.controls[i]
        s_vec, gathers, eta_off = [], [], []
        for a in range(len(mc)):
            diag, terms = drift_stencil(sys.grid, mc.xi[a])
            s_vec.append(lam + diag + mc.eta[a, i])
            gathers.append(terms)
            off = mc.eta[a].copy()
            off[i] = 0.0
            eta_off.append(off)
        per_mode.append((np.array(s_vec), gathers, np.array(eta_off)))

    prev_norm = None
    contraction = float("nan")
    for sweep in range(1, max_iter + 1):
        for i in range(sys.m):
            s_vec, gathers, eta_off = per_mode[i]
            cost_i = sys.cost[i]
            ui = u[i]
            for x in range(S):
                q = cost_i[x].copy()
                for a, terms in enumerate(gathers):
                    for nbr, w in terms:
                        q[a] -= w * ui[nbr[x]]
                q -= eta_off @ u[:, x]
                ui[x] = np.min(q / s_vec)
        norm = float(np.max(np.abs(bellman_residual(sys, lam, u))))
        if prev_norm not in (None, 0.0):
            contraction = norm / prev_norm
        prev_norm = norm
        if norm <= tol:
            diag = SolveDiagnostics(sweep, norm, contraction,
                                    time.perf_counter() - start)
            return u, diag
    diag = SolveDiagnostics(max_iter, prev_norm if prev_norm is not None
                            else float("inf"), contraction,
                            time.perf_counter() - start)
    raise NoConvergence(f"value iteration stalled at residual {diag.final_residual}",
                        diagnostics=diag)


def policy_evaluate(sys: DiscreteSystem, lam: float, policy: Policy) -> ValueField:
    """Exact value of a stationary policy (dense solve at desk scale)."""
    if lam <= 0.0:
        raise BadValue("policy_evaluate requires lam > 0")
    A = policy_matrix(sys, lam, policy)
    rhs = policy_cost(sys, policy)
    nn = A.shape[0]
    if nn <= DENSE_LIMIT:
        try:
            flat = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(f"policy evaluation failed: {exc}")
    else:
        flat = _gauss_seidel(A, rhs, tol=1e-12)
    if not np.all(np.isfinite(flat)):
        raise SingularSystem("policy evaluation produced non-finite values")
    return flat.reshape(sys.m, sys.num_states)


def _gauss_seidel(A, b, tol, max_sweeps=500000):
    diag = np.diag(A).copy()
    if np.min(np.abs(diag)) <= 0.0:
        raise SingularSystem("zero diagonal in iterative policy solve")
    x = np.zeros_like(b)
    off = A - np.diag(diag)
    for _ in range(max_sweeps):
        for r in range(len(b)):
            x[r] = (b[r] - off[r] @ x) / diag[r]
        if np.max(np.abs(A @ x - b)) <= tol:
            return x
    raise SingularSystem("iterative policy solve did not reach tolerance")


IMPROVE_TOL = 1e-11


def policy_iterate(sys: DiscreteSystem, lam: float, tol: float = 1e-10,
                   u0: Optional[ValueField] = None, max_iter: int = 200):
    """Howard iteration: evaluate, improve greedily, repeat to stability.

    A control displaces the incumbent only when it improves the relation
    by more than a small hysteresis; exact ties otherwise go to the
    lowest index.  This keeps roundoff-level ties from cycling the
    policy while leaving every genuine improvement intact.
    """
    if lam <= 0.0:
        raise BadValue("policy_iterate requires lam > 0")
    start = time.perf_counter()
    base = np.zeros((sys.m, sys.num_states)) if u0 is None else np.asarray(u0)
    _, policy = bellman_policy(sys, lam, base)
    last_norm = float("inf")
    states = np.arange(sys.num_states)
    for it in range(1, max_iter + 1):
        u = policy_evaluate(sys, lam, policy)
        residual, greedy = bellman_policy(sys, lam, u)
        last_norm = float(np.max(np.abs(residual)))
        if last_norm <= tol:
            diag = SolveDiagnostics(it, last_norm, float("nan"),
                                    time.perf_counter() - start)
            return u, policy, diag
        switched = False
        new_policy = policy.copy()
        for i in range(sys.m):
            vals = control_values(sys, lam, u, i)
            incumbent = vals[policy[i], states]
            best = vals[greedy[i], states]
            take = best > incumbent + IMPROVE_TOL
            if np.any(take):
                new_policy[i][take] = greedy[i][take]
                switched = True
        if not switched:
            diag = SolveDiagnostics(it, last_norm, float("nan"),
                                    time.perf_counter() - start)
            if last_norm <= max(10.0 * tol, 10.0 * IMPROVE_TOL):
                return u, policy, diag
            raise NoConvergence(
                f"stable policy with residual {last_norm}", diagnostics=diag)
        policy = new_policy
    diag = SolveDiagnostics(max_iter, last_norm, float("nan"),
                            time.perf_counter() - start)
    raise NoConvergence("policy iteration exceeded max_iter", diagnostics=diag)


def comparison_check(sys: DiscreteSystem, lam: float, sub: ValueField,
                     sup: ValueField) -> bool:
    """Order test behind the comparison principle.

    Requires residual(sub) <= 0 and residual(sup) >= 0 componentwise
    (within a sign tolerance); then reports whether sub <= sup holds
    everywhere.  For valid inputs the discrete comparison principle makes
    the answer always True; False is a certified counterexample.
    """
    r_sub = bellman_residual(sys, lam, sub)
    if float(np.max(r_sub)) > SIGN_TOL:
        raise NotASubsolution(f"max residual {float(np.max(r_sub))} > 0")
    r_sup = bellman_residual(sys, lam, sup)
    if float(np.min(r_sup)) < -SIGN_TOL:
        raise NotASupersolution(f"min residual {float(np.min(r_sup))} < 0")
    return bool(np.all(sub <= sup + SIGN_TOL))


# ---------------------------------------------------------------------------
# ergodic problem
# ---------------------------------------------------------------------------

def _frozen_scalar_system(sys: DiscreteSystem, lam: float, u: ValueField,
                          i: int) -> DiscreteSystem:
    """One mode's equation with the coupling slot frozen at u.

    Moving the constant terms into the cost gives a one-mode system whose
    solution is the v_i of the map T:
    cost'(x, a) = L_i(x, a) - eta_a . u(x) + lam * u_i(x).
    """
    mc = sys.controls[i]
    cost = (sys.cost[i] - (u.T @ mc.eta.T) + lam * u[i][:, None])
    frozen = ModeControls(mode=0, xi=mc.xi.copy(),
                          eta=np.zeros((len(mc), 1)),
                          labels=list(mc.labels),
                          cost_fn=lambda _x, _c=cost: _c)
    return DiscreteSystem(grid=sys.grid, m=1, controls=ControlSet([frozen]),
                          cost=[cost], label=f"{sys.label}:frozen{i}",
                          drift_bound=sys.drift_bound)


def ergodic_map(sys: DiscreteSystem, lam: float, u: ValueField,
                inner_tol: float = 1e-12):
    """One application of T: solve the frozen scalar systems, normalize.

    Returns (v, Tu, c_est) with Tu = v - min v per mode and
    c_est = -lam * min_x v_i.
    """
    if lam <= 0.0:
        raise BadValue("ergodic map requires lam > 0")
    S = sys.num_states
    v = np.empty((sys.m, S))
    for i in range(sys.m):
        scalar = _frozen_scalar_system(sys, lam, u, i)
        vi, _, _ = policy_iterate(scalar, lam, tol=inner_tol)
        v[i] = vi[0]
    mins = v.min(axis=1)
    tu = v - mins[:, None]
    return v, tu, -lam * mins


def ergodic_solve(sys: DiscreteSystem, lam: float, tol: float = 1e-8,
                  damping: float = 0.5, max_outer: int = 5000) -> ErgodicResult:
    """Damped fixed-point iteration of T.

    Iterates u <- (1 - damping) u + damping Tu until |Tu - u| <= tol in
    sup norm, then reports c = -lam * min v from the final sweep together
    with the direct residual |H_discrete[u] - c| (checked against 10*tol
    by the caller's tests; recorded here).  Non-convergence raises: the
    fixed point exists but nothing guarantees this iteration finds it.
    """
    if not (0.0 < damping <= 1.0):
        raise BadValue("damping must lie in (0, 1]")
    if lam <= 0.0:
        raise BadValue("ergodic_solve requires lam > 0")
    u = np.zeros((sys.m, sys.num_states))
    for outer in range(1, max_outer + 1):
        _, tu, c_est = ergodic_map(sys, lam, u)
        gap = float(np.max(np.abs(tu - u)))
        if gap <= tol:
            final = tu
            residual = float(np.max(np.abs(
                bellman_residual(sys, 0.0, final) - c_est[:, None])))
            return ErgodicResult(c=c_est, u=final, outer_iterations=outer,
                                 residual=residual)
        u = (1.0 - damping) * u + damping * tu
    raise NoConvergence(f"ergodic iteration gap above {tol} after "
                        f"{max_outer} sweeps")
