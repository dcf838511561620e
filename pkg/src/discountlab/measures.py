"""Closed measures, their linear programs, and exact duality audits.

A discrete measure is a nonnegative weight mu_i(x, a) per (mode, state,
control).  Pairing it against the per-control affine relations of the
system gives the closedness constraints: with A the linearized operator
(rows (i, x, a), columns (j, y)) from the discretize module,

    lam > 0:  A^T mu = e_(k,z)      (one equality per test direction)
    lam = 0:  A^T mu = 0  together with the mass bound <mu, 1> <= 1.

Summing all rows of the lam > 0 system against the constant test field
yields the normalization sum_i mu_i(x,a) (lam + sum_j eta_{a,j}) = 1,
which every feasible measure therefore satisfies identically.

Because the constraint matrix is the literal transpose of the matrix the
solver linearizes, the three numbers

    solver value at (z, k),
    min <mu, L> over closed measures,
    max u_k(z) over subsolution fields,

agree exactly in finite dimensions; ``duality_audit`` checks the
agreement to fixed tolerances and is the package's central oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .discretize import (DiscreteSystem, Policy, ValueField,
                         linearized_matrix, policy_matrix)
from .errors import BadValue, InfeasibleLP, SingularSystem, UnboundedLP
from .lp import OPTIMAL, UNBOUNDED, LPProblem, lp_solve
from .solver import policy_iterate

MASS_TOL = 1e-9
ZERO_MASS_TOL = 1e-12
DUALITY_TOL = 1e-7


# ---------------------------------------------------------------------------
# measure vectors
# ---------------------------------------------------------------------------

@dataclass
class MeasureVector:
    """Nonnegative weights per (mode, state, control) with a discount tag."""

    lam_tag: float
    weights: list  # per mode, (S, A_i)

    @classmethod
    def from_flat(cls, sys: DiscreteSystem, flat: np.ndarray,
                  lam_tag: float) -> "MeasureVector":
        weights = []
        for i in range(sys.m):
            off = sys.var_offsets[i]
            block = flat[off:off + sys.num_states * sys.num_controls(i)]
            weights.append(np.asarray(block, dtype=float)
                           .reshape(sys.num_states, sys.num_controls(i)).copy())
        return cls(lam_tag=lam_tag, weights=weights)

    def flat(self) -> np.ndarray:
        return np.concatenate([w.reshape(-1) for w in self.weights])

    def total_mass(self) -> float:
        return float(sum(w.sum() for w in self.weights))

    def discount_mass(self, sys: DiscreteSystem) -> float:
        """<mu, (lam + sum_j eta_j) 1>, the discounted normalization."""
        total = 0.0
        for i, w in enumerate(self.weights):
            s = self.lam_tag + sys.controls[i].eta.sum(axis=1)
            total += float((w * s).sum())
        return total

    def pair_cost(self, sys: DiscreteSystem) -> float:
        return float(sum((w * sys.cost[i]).sum()
                         for i, w in enumerate(self.weights)))

    def pair_field(self, u: ValueField) -> float:
        """<mu, u>: each (i, x, a) weight multiplies u_i(x)."""
        return float(sum((w.sum(axis=1) * u[i]).sum()
                         for i, w in enumerate(self.weights)))

    def field_coefficients(self, sys: DiscreteSystem) -> np.ndarray:
        """Row vector over flat fields: coefficients of <mu, .>."""
        out = np.empty(sys.m * sys.num_states)
        for i, w in enumerate(self.weights):
            out[i * sys.num_states:(i + 1) * sys.num_states] = w.sum(axis=1)
        return out

    def validate(self, sys: DiscreteSystem):
        for i, w in enumerate(self.weights):
            if float(np.min(w, initial=0.0)) < 0.0:
                raise BadValue(f"negative weight in mode {i}")
        if self.lam_tag > 0.0:
            norm = self.discount_mass(sys)
            if abs(norm - 1.0) > MASS_TOL:
                raise BadValue(f"discounted mass {norm} != 1")
        else:
            if self.total_mass() > 1.0 + ZERO_MASS_TOL:
                raise BadValue(f"mass {self.total_mass()} exceeds 1")

    def tv_distance(self, other: "MeasureVector") -> float:
        return float(sum(np.abs(a - b).sum()
                         for a, b in zip(self.weights, other.weights)))

    def to_json(self) -> str:
        entries = []
        for i, w in enumerate(self.weights):
            for x, a in zip(*np.nonzero(w)):
                entries.append({"mode": int(i), "x": int(x), "a": int(a),
                                "weight": float(w[x, a])})
        return json.dumps({"lambda_tag": self.lam_tag, "entries": entries})


# ---------------------------------------------------------------------------
# constraint assembly and the measure-side LP
# ---------------------------------------------------------------------------

def assemble_closed_constraints(sys: DiscreteSystem, lam: float,
                                z: Optional[int] = None,
                                k: Optional[int] = None) -> LPProblem:
    """Equality system over measure weights, transposed from the solver.

    For lam > 0 the right-hand side is the indicator of test direction
    (k, z); for lam = 0 it is zero and the mass row <mu, 1> <= 1 is
    appended.  The objective is left at zero for the caller to fill.
    """
    if lam > 0.0:
        if z is None or k is None:
            raise BadValue("lam > 0 requires a source state and mode")
    elif lam == 0.0:
        if z is not None or k is not None:
            raise BadValue("lam = 0 takes no source point")
    else:
        raise BadValue("lam must be >= 0")
    A = linearized_matrix(sys, lam)
    M = np.ascontiguousarray(A.T)
    nrows, ncols = M.shape
    if lam > 0.0:
        b = np.zeros(nrows)
        b[k * sys.num_states + z] = 1.0
        senses = ["="] * nrows
    else:
        M = np.vstack([M, np.ones((1, ncols))])
        b = np.zeros(nrows + 1)
        b[-1] = 1.0
        senses = ["="] * nrows + ["<="]
    return LPProblem(c=np.zeros(ncols), A=M, b=b, senses=senses)


def _measure_lp(sys: DiscreteSystem, lam: float, z: int, k: int):
    if lam <= 0.0:
        raise BadValue("green_poisson requires lam > 0")
    problem = assemble_closed_constraints(sys, lam, z, k)
    problem.c = sys.cost_flat()
    sol = lp_solve(problem)
    if sol.status != OPTIMAL:
        raise SingularSystem(f"measure LP returned {sol.status}")
    mu = MeasureVector.from_flat(sys, np.maximum(sol.x, 0.0), lam)
    mu.validate(sys)
    return mu, sol


def green_poisson(sys: DiscreteSystem, lam: float, z: int, k: int):
    """Minimizing closed measure representing the value at (z, k).

    Returns (measure, value).  Infeasibility is impossible for a valid
    system (point-mass seeds always generate a feasible occupation), so
    a non-Optimal status signals corrupted data.
    """
    mu, sol = _measure_lp(sys, lam, z, k)
    return mu, sol.objective_value


def occupation_from_policy(sys: DiscreteSystem, lam: float, policy: Policy,
                           z: int, k: int) -> MeasureVector:
    """Occupation weights of one policy seeded at (z, k).

    Solves the transposed policy system; the M-matrix certificate makes
    the transpose inverse nonnegative, so weights are clamped only of
    roundoff size.
    """
    if lam <= 0.0:
        raise BadValue("occupation requires lam > 0")
    A = policy_matrix(sys, lam, policy)
    rhs = np.zeros(A.shape[0])
    rhs[k * sys.num_states + z] = 1.0
    try:
        dense = np.linalg.solve(A.T, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"occupation solve failed: {exc}")
    if float(np.min(dense)) < -1e-10:
        raise SingularSystem("occupation weights significantly negative")
    dense = np.maximum(dense, 0.0)
    flat = np.zeros(sys.total_vars)
    S = sys.num_states
    for i in range(sys.m):
        Ai = sys.num_controls(i)
        idx = sys.var_offsets[i] + np.arange(S) * Ai + policy[i]
        flat[idx] = dense[i * S:(i + 1) * S]
    mu = MeasureVector.from_flat(sys, flat, lam)
    mu.validate(sys)
    return mu


# ---------------------------------------------------------------------------
# subsolution LP (the dual side)
# ---------------------------------------------------------------------------

def subsolution_lp(sys: DiscreteSystem, lam: float, z: int, k: int,
                   extra_rows: Optional[Sequence] = None):
    """max u_k(z) over fields satisfying every per-control relation <= cost.

    ``extra_rows`` is a list of (measure, bound) pairs adding
    <measure, u> <= bound.  Unboundedness (possible at lam = 0 when
    nothing pins the additive freedom) raises ``UnboundedLP`` with the
    improving ray attached.
    """
    A = linearized_matrix(sys, lam)
    b = sys.cost_flat()
    senses = ["<="] * A.shape[0]
    rows = [A]
    rhs = [b]
    for mu, bound in (extra_rows or []):
        rows.append(mu.field_coefficients(sys)[None, :])
        rhs.append(np.array([bound]))
        senses.append("<=")
    nfields = sys.m * sys.num_states
    c = np.zeros(nfields)
    c[k * sys.num_states + z] = -1.0
    problem = LPProblem(c=c, A=np.vstack(rows), b=np.concatenate(rhs),
                        senses=senses, free=np.ones(nfields, dtype=bool))
    sol = lp_solve(problem)
    if sol.status == UNBOUNDED:
        raise UnboundedLP("subsolution LP is unbounded", ray=sol.ray)
    if sol.status != OPTIMAL:
        raise InfeasibleLP(f"subsolution LP returned {sol.status}")
    field = sol.x.reshape(sys.m, sys.num_states)
    return field, -sol.objective_value


# ---------------------------------------------------------------------------
# audits
# ---------------------------------------------------------------------------

@dataclass
class DualityReport:
    z: int
    k: int
    lam: float
    solver_value: float
    measure_value: float
    subsolution_value: float
    slackness_residual: float
    passed: bool

    def spread(self) -> float:
        vals = (self.solver_value, self.measure_value, self.subsolution_value)
        return max(vals) - min(vals)

    def to_json(self) -> str:
        return json.dumps({
            "z": self.z, "k": self.k, "lambda": self.lam,
            "solver_value": self.solver_value,
            "measure_value": self.measure_value,
            "subsolution_value": self.subsolution_value,
            "slackness_residual": self.slackness_residual,
            "passed": self.passed})


def duality_audit(sys: DiscreteSystem, lam: float, z: int, k: int,
                  solver_value: Optional[float] = None,
                  tol: float = DUALITY_TOL) -> DualityReport:
    """Three-way agreement: solver value, measure-LP min, subsolution max."""
    if lam <= 0.0:
        raise BadValue("duality audit requires lam > 0")
    if solver_value is None:
        u, _, _ = policy_iterate(sys, lam, tol=1e-10)
        solver_value = float(u[k, z])
    mu, sol = _measure_lp(sys, lam, z, k)
    measure_value = sol.objective_value
    _, sub_value = subsolution_lp(sys, lam, z, k)
    passed = (abs(solver_value - measure_value) <= tol
              and abs(solver_value - sub_value) <= tol)
    return DualityReport(z=z, k=k, lam=lam, solver_value=solver_value,
                         measure_value=measure_value,
                         subsolution_value=sub_value,
                         slackness_residual=sol.slackness_residual,
                         passed=passed)


@dataclass
class SupportReport:
    entries: list            # (mode, state, control, weight)
    xi_box: list             # per xi axis, (lo, hi) over the support
    eta_box: list            # per eta axis, (lo, hi)
    control_xi_box: list
    control_eta_box: list
    interior: bool

    def to_json(self) -> str:
        return json.dumps({
            "entries": [{"mode": i, "x": x, "a": a, "weight": w}
                        for (i, x, a, w) in self.entries],
            "xi_box": self.xi_box, "eta_box": self.eta_box,
            "control_xi_box": self.control_xi_box,
            "control_eta_box": self.control_eta_box,
            "interior": self.interior})


def support_audit(mu: MeasureVector, sys: DiscreteSystem,
                  mass_floor: float = 1e-10) -> SupportReport:
    """Bounding box of the carried controls versus the sampling box.

    ``interior`` is True when on every non-degenerate xi axis the support
    box stays strictly inside the sampled box; support touching the
    boundary flags an inadequate truncation radius.  The eta axes are
    reported but excluded from the verdict: they sample the coupling
    cone exactly rather than truncating a continuum.
    """
    entries = []
    xi_pts, eta_pts = [], []
    all_xi, all_eta = [], []
    for i, w in enumerate(mu.weights):
        mc = sys.controls[i]
        all_xi.append(mc.xi)
        all_eta.append(mc.eta)
        for x, a in zip(*np.nonzero(w > mass_floor)):
            entries.append((int(i), int(x), int(a), float(w[x, a])))
            xi_pts.append(mc.xi[a])
            eta_pts.append(mc.eta[a])
    ctrl_xi = np.vstack(all_xi)
    ctrl_eta = np.vstack(all_eta)
    cxi_box = [(float(ctrl_xi[:, d].min()), float(ctrl_xi[:, d].max()))
               for d in range(ctrl_xi.shape[1])]
    ceta_box = [(float(ctrl_eta[:, d].min()), float(ctrl_eta[:, d].max()))
                for d in range(ctrl_eta.shape[1])]
    if xi_pts:
        sxi = np.vstack(xi_pts)
        seta = np.vstack(eta_pts)
        xi_box = [(float(sxi[:, d].min()), float(sxi[:, d].max()))
                  for d in range(sxi.shape[1])]
        eta_box = [(float(seta[:, d].min()), float(seta[:, d].max()))
                   for d in range(seta.shape[1])]
    else:
        xi_box, eta_box = [], []

    def axis_interior(support, box):
        lo, hi = box
        if lo == hi:
            return True
        slo, shi = support
        return lo < slo and shi < hi

    interior = bool(xi_pts) and \
        all(axis_interior(s, c) for s, c in zip(xi_box, cxi_box))
    return SupportReport(entries=entries, xi_box=xi_box, eta_box=eta_box,
                         control_xi_box=cxi_box, control_eta_box=ceta_box,
                         interior=interior)
