"""Vanishing-discount limits, Mather measures, and the selection principle.

Driving the discount down a geometric ladder produces a Cauchy family of
solutions exactly when the undiscounted system is solvable; instances
are normalized first by subtracting the ergodic constants from the cost
(``shift_costs`` / ``ergodic_normalize``), mirroring the fact that a
nonzero ergodic constant makes the discounted values blow up like c/lam.

On the measure side, the rescaled optimal measures lam * mu^lam converge
to minimizers of <nu, L> over the lam = 0 closed measures (the Mather
measures; the zero measure is always feasible, so the minimum is <= 0
and equals 0 exactly on normalized instances).  The optimal face is a
polytope; its vertices are approximated by re-minimizing random linear
objectives and, on tiny instances, enumerated exactly from bases.

The selection principle characterizes the limit field pointwise as the
largest subsolution value at (z, k) among fields that pair
nonpositively with every Mather representative.  ``selection_field``
assembles that pointwise maximum by one LP per grid point, which the
sweep limit must reproduce.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .discretize import (ControlSet, DiscreteSystem, ModeControls, ValueField,
                         linearized_matrix)
from .errors import BadValue, DivergentSweep
from .lp import (OPTIMAL, LPProblem, enumerate_basic_solutions, lp_solve)
from .measures import MeasureVector, assemble_closed_constraints, \
    green_poisson, subsolution_lp
from .solver import ergodic_solve, policy_iterate

DIVERGENCE_BOUND = 1e6
FACE_DEDUP_TOL = 1e-7
ORACLE_VAR_LIMIT = 30


# ---------------------------------------------------------------------------
# cost shifting / normalization
# ---------------------------------------------------------------------------

def shift_costs(sys: DiscreteSystem, shift) -> DiscreteSystem:
    """New system with cost_i + shift_i (conjugate of subtracting shift_i
    from the Hamiltonian of mode i)."""
    shift = np.asarray(shift, dtype=float) * np.ones(sys.m)
    modes = []
    cost = []
    for i in range(sys.m):
        mc = sys.controls[i]
        ci = sys.cost[i] + shift[i]
        cost.append(ci)
        modes.append(ModeControls(mode=i, xi=mc.xi.copy(), eta=mc.eta.copy(),
                                  labels=list(mc.labels),
                                  cost_fn=lambda _x, _c=ci: _c))
    return DiscreteSystem(grid=sys.grid, m=sys.m, controls=ControlSet(modes),
                          cost=cost, label=f"{sys.label}+shift",
                          drift_bound=sys.drift_bound)


def ergodic_normalize(sys: DiscreteSystem, lam: float = 0.05,
                      tol: float = 1e-11, damping: float = 0.5,
                      max_outer: int = 20000):
    """Shift costs by the ergodic constants so the shifted constant is 0."""
    result = ergodic_solve(sys, lam, tol=tol, damping=damping,
                           max_outer=max_outer)
    return shift_costs(sys, result.c), result


# ---------------------------------------------------------------------------
# discount sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    lambdas: list
    fields: list                 # ValueField per rung
    diagnostics: list            # SolveDiagnostics per rung
    cauchy_gaps: list
    uniform_bound: float
    limit_candidate: ValueField
    divergent: bool = False

    def csv_rows(self):
        """Rows of (lambda, sup_norm, cauchy_gap, solver_iters)."""
        rows = []
        for j, lam in enumerate(self.lambdas):
            gap = self.cauchy_gaps[j] if j < len(self.cauchy_gaps) else float("nan")
            rows.append((lam, float(np.max(np.abs(self.fields[j]))), gap,
                         self.diagnostics[j].iterations))
        return rows

    def to_json(self) -> str:
        return json.dumps({
            "lambdas": self.lambdas,
            "sup_norms": [float(np.max(np.abs(v))) for v in self.fields],
            "cauchy_gaps": self.cauchy_gaps,
            "uniform_bound": self.uniform_bound,
            "divergent": self.divergent})


def discount_sweep(sys: DiscreteSystem, lam_start: float = 0.5,
                   ratio: float = 0.5, rungs: int = 18,
                   tol: float = 1e-10) -> SweepResult:
    """Solve down the ladder lam_j = lam_start * ratio^j with warm starts.

    Records the Cauchy gaps and the uniform bound; a bound above 1e6
    flags divergence (the undiscounted system has no solution at this
    normalization) and truncates the ladder there.
    """
    if lam_start <= 0.0 or not (0.0 < ratio < 1.0) or rungs < 2:
        raise BadValue("need lam_start > 0, ratio in (0,1), rungs >= 2")
    lambdas, fields, diags = [], [], []
    u_prev = None
    divergent = False
    for j in range(rungs):
        lam = lam_start * ratio ** j
        u, _, diag = policy_iterate(sys, lam, tol=tol, u0=u_prev)
        lambdas.append(lam)
        fields.append(u)
        diags.append(diag)
        u_prev = u
        if float(np.max(np.abs(u))) > DIVERGENCE_BOUND:
            divergent = True
            break
    gaps = [float(np.max(np.abs(fields[j + 1] - fields[j])))
            for j in range(len(fields) - 1)]
    bound = max(float(np.max(np.abs(v))) for v in fields)
    return SweepResult(lambdas=lambdas, fields=fields, diagnostics=diags,
                       cauchy_gaps=gaps, uniform_bound=bound,
                       limit_candidate=fields[-1], divergent=divergent)


# ---------------------------------------------------------------------------
# Mather measures
# ---------------------------------------------------------------------------

def closedness_residual(sys: DiscreteSystem, mu: MeasureVector) -> float:
    """Sup norm of the lam = 0 closedness rows applied to mu."""
    M = linearized_matrix(sys, 0.0).T
    return float(np.max(np.abs(M @ mu.flat()), initial=0.0))


def stencil_norm(sys: DiscreteSystem) -> float:
    """Largest absolute coefficient of the lam = 0 operator."""
    return float(np.max(np.abs(linearized_matrix(sys, 0.0))))


def mather_from_sweep(sys: DiscreteSystem, sweep: SweepResult, z: int,
                      k: int) -> MeasureVector:
    """lam * (optimal measure) at the smallest rung, re-tagged lam = 0.

    Its closedness residual is O(lam_min) and <nu, L> = lam * v_k(z).
    """
    if sweep.divergent:
        raise DivergentSweep("sweep was flagged divergent")
    lam = sweep.lambdas[-1]
    mu, _ = green_poisson(sys, lam, z, k)
    weights = [lam * w for w in mu.weights]
    return MeasureVector(lam_tag=0.0, weights=weights)


def mather_lp(sys: DiscreteSystem):
    """min <nu, L> over lam = 0 closed measures with mass at most 1.

    Always feasible (nu = 0), so the minimum is <= 0; it is >= 0 exactly
    when the system is normalized (a zero-constant ergodic certificate
    exists).
    """
    problem = assemble_closed_constraints(sys, 0.0)
    problem.c = sys.cost_flat()
    sol = lp_solve(problem)
    if sol.status != OPTIMAL:
        raise BadValue(f"Mather LP returned {sol.status}")
    nu = MeasureVector.from_flat(sys, np.maximum(sol.x, 0.0), 0.0)
    nu.validate(sys)
    return nu, sol.objective_value


@dataclass
class MatherSet:
    representatives: list        # MeasureVector, lam_tag = 0
    labels: list
    min_value: float
    exhaustive: bool = False
    sampling_found_all: Optional[bool] = None

    def to_json(self) -> str:
        return json.dumps({
            "min_value": self.min_value,
            "exhaustive": self.exhaustive,
            "sampling_found_all": self.sampling_found_all,
            "representatives": [json.loads(nu.to_json())
                                for nu in self.representatives],
            "labels": self.labels})


def _dedup(measures, labels, tol=FACE_DEDUP_TOL):
    kept, kept_labels = [], []
    for nu, lab in zip(measures, labels):
        if all(nu.tv_distance(other) > tol for other in kept):
            kept.append(nu)
            kept_labels.append(lab)
    return kept, kept_labels


SUPPORT_FLOOR = 1e-7


def _polish_face_point(sys, A_face, b_face, senses, c, raw):
    """Re-solve the face LP restricted to the significant support.

    Vertices of the tolerance-relaxed face can carry junk mass of order
    tol / cost on states with small positive cost; such entries are
    harmless for values but poisonous as <nu, u> <= 0 rows because those
    rows are scale invariant.  Restricting to the heavy support and
    re-solving yields an exactly closed measure or proves the support
    spurious (in which case the sample is dropped).
    """
    cols = np.nonzero(raw > SUPPORT_FLOOR)[0]
    zero = MeasureVector.from_flat(sys, np.zeros(A_face.shape[1]), 0.0)
    if len(cols) == 0:
        return zero
    problem = LPProblem(c=c[cols], A=A_face[:, cols], b=b_face, senses=senses)
    sol = lp_solve(problem)
    if sol.status != OPTIMAL:
        return None
    flat = np.zeros(A_face.shape[1])
    flat[cols] = np.maximum(sol.x, 0.0)
    nu = MeasureVector.from_flat(sys, flat, 0.0)
    nu.validate(sys)
    return nu


def mather_face_samples(sys: DiscreteSystem, count: int, seed: int,
                        tol: float = 1e-9) -> MatherSet:
    """Representatives of the optimal face of the Mather LP.

    Samples ``count`` random linear objectives over the face polytope
    {closed, mass <= 1, <nu, L> <= min + tol}, polishes each sample onto
    its significant support, and deduplicates in total variation.  On
    instances with at most 30 weight variables the face (with the value
    row at equality) is additionally enumerated exactly from bases; the
    enumerated vertex set then replaces the samples and the report
    records whether sampling had found every vertex.
    """
    _, min_value = mather_lp(sys)
    base = assemble_closed_constraints(sys, 0.0)
    ncols = base.A.shape[1]
    A_face = np.vstack([base.A, sys.cost_flat()[None, :]])
    b_face = np.concatenate([base.b, [min_value + tol]])
    senses = list(base.senses) + ["<="]

    rng = np.random.default_rng(seed)
    sampled, labels = [], []
    for _ in range(count):
        problem = LPProblem(c=rng.standard_normal(ncols), A=A_face,
                            b=b_face, senses=senses)
        sol = lp_solve(problem)
        if sol.status != OPTIMAL:
            continue
        nu = _polish_face_point(sys, A_face, b_face, senses, problem.c,
                                np.maximum(sol.x, 0.0))
        if nu is None:
            continue
        sampled.append(nu)
        labels.append("random-objective")
    sampled, labels = _dedup(sampled, labels)

    if ncols <= ORACLE_VAR_LIMIT:
        # exact face: closed rows, mass row slacked, value row at equality
        n_eq = base.A.shape[0] - 1  # closed rows (mass row is last)
        A_std = np.zeros((base.A.shape[0] + 1, ncols + 1))
        A_std[:base.A.shape[0], :ncols] = base.A
        A_std[n_eq, ncols] = 1.0          # mass slack
        A_std[-1, :ncols] = sys.cost_flat()
        b_std = np.concatenate([base.b, [min_value]])
        vertices = enumerate_basic_solutions(A_std, b_std, tol=1e-8)
        exact, exact_labels = [], []
        for v in vertices:
            nu = MeasureVector.from_flat(sys, np.maximum(v[:ncols], 0.0), 0.0)
            nu.validate(sys)
            exact.append(nu)
            exact_labels.append("lp-vertex")
        exact, exact_labels = _dedup(exact, exact_labels)
        found_all = all(any(nu.tv_distance(s) <= FACE_DEDUP_TOL
                            for s in sampled) for nu in exact)
        return MatherSet(representatives=exact, labels=exact_labels,
                         min_value=min_value, exhaustive=True,
                         sampling_found_all=found_all)
    return MatherSet(representatives=sampled, labels=labels,
                     min_value=min_value, exhaustive=False)


# ---------------------------------------------------------------------------
# selection principle
# ---------------------------------------------------------------------------

def selection_solve(sys: DiscreteSystem, mset: MatherSet, z: int, k: int):
    """Largest subsolution value at (z, k) among fields pairing <= 0 with
    every Mather representative.  Unbounded when the rows fail to pin the
    additive freedom (raised with the ray attached)."""
    if not mset.representatives:
        raise BadValue("selection requires at least one Mather representative")
    rows = [(nu, 0.0) for nu in mset.representatives]
    return subsolution_lp(sys, 0.0, z, k, extra_rows=rows)


def selection_field(sys: DiscreteSystem, mset: MatherSet) -> ValueField:
    """Pointwise selection values, one LP per (mode, state)."""
    out = np.empty((sys.m, sys.num_states))
    for k in range(sys.m):
        for z in range(sys.num_states):
            _, out[k, z] = selection_solve(sys, mset, z, k)
    return out


@dataclass
class ConvergenceReport:
    rung_gaps: list
    limit_vs_selection_gap: float
    measure_pairings: list
    passed: bool
    gap_tol: float
    pairing_tol: float

    def to_json(self) -> str:
        return json.dumps({
            "rung_gaps": self.rung_gaps,
            "limit_vs_selection_gap": self.limit_vs_selection_gap,
            "measure_pairing_max": max(self.measure_pairings, default=0.0),
            "pass": self.passed})


def convergence_report(sys: DiscreteSystem, sweep: SweepResult,
                       selection: ValueField,
                       mset: Optional[MatherSet] = None,
                       gap_tol: float = 1e-5,
                       pairing_tol: float = 1e-6) -> ConvergenceReport:
    """Machine-readable verdict tying the two pipelines together."""
    limit = sweep.limit_candidate
    gap = float(np.max(np.abs(limit - selection)))
    pairings = []
    if mset is not None:
        pairings = [nu.pair_field(limit) for nu in mset.representatives]
    passed = (not sweep.divergent and gap <= gap_tol
              and all(p <= pairing_tol for p in pairings))
    return ConvergenceReport(rung_gaps=list(sweep.cauchy_gaps),
                             limit_vs_selection_gap=gap,
                             measure_pairings=pairings, passed=passed,
                             gap_tol=gap_tol, pairing_tol=pairing_tol)
