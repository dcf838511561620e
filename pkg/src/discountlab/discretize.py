"""Exact finite monotone discretization of a weakly coupled system.

The continuum problem lam*u_i + H_i(x, Du_i, u) = 0 is replaced by the
finite system

    lam*u_i(x) + max_a [ xi_a . D_h u_i(x) + eta_a . u(x) - L_i(x, a) ] = 0

on a periodic grid, where a ranges over a finite per-mode control list
(xi_a, eta_a) with eta_a in the admissible coupling cone, D_h is the
upwind difference (backward where xi_d > 0, forward where xi_d <= 0) and
L_i(x, a) is a finite running cost.

Because eta_a has nonpositive off-mode entries and nonnegative sum, the
per-policy linear operator

    (lam + sum_d |xi_d|/dx + eta_{a,i}) u_i(x)
        - sum_d (|xi_d|/dx) u_i(upwind neighbor)
        + sum_{j != i} eta_{a,j} u_j(x)

has positive diagonal, nonpositive off-diagonal entries and row sums
lam + sum_j eta_{a,j} >= lam: a strictly diagonally dominant M-matrix for
every lam > 0.  That certificate is what makes every downstream identity
exact, and it is re-verified at assembly.

The same stencil coefficients drive three consumers: the pointwise
Bellman residual, the per-policy linear solves, and (transposed) the
closed-measure constraint matrix.  ``linearized_matrix`` is the single
source for the matrix form, so the transpose used by the measure module
is bit-identical to the operator used by the solver.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (BadDimension, BadResolution, CouplingOutsideCone,
                     MissingCost)
from .model import HamiltonianModel, LagrangianTable, in_coupling_cone

ValueField = np.ndarray   # shape (m, S)
Policy = np.ndarray       # int array, shape (m, S)


# ---------------------------------------------------------------------------
# periodic grid
# ---------------------------------------------------------------------------

@dataclass
class TorusGrid:
    n: int
    N: int
    num_states: int = field(init=False)
    dx: float = field(init=False)

    def __post_init__(self):
        self.num_states = self.N ** self.n
        self.dx = 1.0 / self.N
        idx = np.arange(self.num_states)
        if self.n == 1:
            coords = idx.reshape(-1, 1)
        else:
            coords = np.stack([idx // self.N, idx % self.N], axis=-1)
        self._coords = coords
        self.x = coords / self.N
        self._fwd, self._bwd = [], []
        for d in range(self.n):
            shift = coords.copy()
            shift[:, d] = (coords[:, d] + 1) % self.N
            self._fwd.append(self._flatten(shift))
            shift = coords.copy()
            shift[:, d] = (coords[:, d] - 1) % self.N
            self._bwd.append(self._flatten(shift))

    def _flatten(self, coords):
        if self.n == 1:
            return coords[:, 0].copy()
        return coords[:, 0] * self.N + coords[:, 1]

    def forward(self, d: int) -> np.ndarray:
        """State indices one step ahead along axis d (periodic)."""
        return self._fwd[d]

    def backward(self, d: int) -> np.ndarray:
        return self._bwd[d]


def build_grid(n: int, N: int) -> TorusGrid:
    if n not in (1, 2):
        raise BadDimension(f"dimension {n} unsupported; use 1 or 2")
    if N < 2:
        raise BadResolution(f"need at least 2 points per dimension, got {N}")
    return TorusGrid(n=int(n), N=int(N))


# ---------------------------------------------------------------------------
# control sets
# ---------------------------------------------------------------------------

@dataclass
class ModeControls:
    """Finite controls of one mode: rows of (xi, eta) plus a cost source."""

    mode: int
    xi: np.ndarray    # (A, n)
    eta: np.ndarray   # (A, m)
    labels: list
    cost_fn: Optional[Callable] = None  # cost_fn(x_points) -> (S, A)

    def __len__(self):
        return len(self.xi)


@dataclass
class ControlSet:
    modes: list  # [ModeControls]

    @property
    def m(self):
        return len(self.modes)

    def __getitem__(self, i) -> ModeControls:
        return self.modes[i]


def _symmetric_axis(radius: float, count: int) -> np.ndarray:
    axis = np.linspace(-radius, radius, count)
    if not np.any(axis == 0.0):
        axis = np.sort(np.append(axis, 0.0))
    return axis


def sample_controls(model_or_table, mode: int, xi_radius: float,
                    xi_count: int, eta_spec: Sequence) -> ModeControls:
    """Build one mode's control list from a model or a numeric cost table.

    xi runs over the symmetric uniform grid of [-xi_radius, xi_radius]^n
    (0 is inserted if the count would miss it, so the constant field is
    always exactly representable), crossed with the given eta vectors.
    Each eta must satisfy the cone sign conditions exactly.  Costs come
    from the model's closed-form running cost when available, otherwise
    from table lookups; a control without a finite cost is rejected.
    """
    if xi_count < 1:
        raise ValueError("xi_count must be >= 1")
    if isinstance(model_or_table, LagrangianTable):
        return _controls_from_table_grid(model_or_table, mode,
                                         float(xi_radius), int(xi_count),
                                         eta_spec)
    model = model_or_table
    etas = [np.asarray(e, dtype=float) for e in eta_spec]
    for e in etas:
        if e.shape != (model.m,):
            raise CouplingOutsideCone(f"eta {e.tolist()} has wrong length")
        if not in_coupling_cone(e, mode):
            raise CouplingOutsideCone(
                f"eta {e.tolist()} violates the cone of mode {mode}")
    axis = _symmetric_axis(float(xi_radius), int(xi_count))
    if model.n == 1:
        xis = axis.reshape(-1, 1)
    else:
        g0, g1 = np.meshgrid(axis, axis, indexing="ij")
        xis = np.stack([g0.ravel(), g1.ravel()], axis=-1)
    xi_rows = np.repeat(xis, len(etas), axis=0)
    eta_rows = np.tile(np.stack(etas), (len(xis), 1))
    labels = [f"{model.zoo_id or 'custom'}:mode{mode}:xi{r.tolist()}:eta{e.tolist()}"
              for r, e in zip(xi_rows, eta_rows)]

    if model.lagrangian_hint is None:
        raise MissingCost(f"model {model.zoo_id!r} provides no cost source")
    probe = np.zeros((1, model.n))
    for r, e in zip(xi_rows, eta_rows):
        val = np.asarray(model.lagrangian_hint(probe, mode, r, e), dtype=float)
        if not np.all(np.isfinite(val)):
            raise MissingCost(
                f"no finite cost for mode {mode} control xi={r.tolist()}, "
                f"eta={e.tolist()}")

    def cost_fn(x_points, _mode=mode, _xi=xi_rows, _eta=eta_rows):
        cols = [np.asarray(model.lagrangian_hint(x_points, _mode, r, e), dtype=float)
                for r, e in zip(_xi, _eta)]
        return np.stack(cols, axis=-1)

    return ModeControls(mode=mode, xi=xi_rows, eta=eta_rows, labels=labels,
                        cost_fn=cost_fn)


def _controls_from_table_grid(table: LagrangianTable, mode: int,
                              xi_radius: float, xi_count: int,
                              eta_spec: Sequence) -> ModeControls:
    """Table-backed control sampling: requested points must sit on the
    table grids with finite values at every stored x."""
    if mode != table.mode:
        raise MissingCost(f"table covers mode {table.mode}, not {mode}")
    etas = [np.asarray(e, dtype=float) for e in eta_spec]
    for e in etas:
        if not in_coupling_cone(e, mode):
            raise CouplingOutsideCone(
                f"eta {e.tolist()} violates the cone of mode {mode}")
    axis = _symmetric_axis(xi_radius, xi_count)
    if table.n == 1:
        xis = axis.reshape(-1, 1)
    else:
        g0, g1 = np.meshgrid(axis, axis, indexing="ij")
        xis = np.stack([g0.ravel(), g1.ravel()], axis=-1)
    xi_rows = np.repeat(xis, len(etas), axis=0)
    eta_rows = np.tile(np.stack(etas), (len(xis), 1))
    cols = []
    for r, e in zip(xi_rows, eta_rows):
        try:
            vals = table.lookup(r, e)
        except KeyError as exc:
            raise MissingCost(str(exc))
        if not np.all(np.isfinite(vals)):
            raise MissingCost(f"table cost infinite at xi={r.tolist()}, "
                              f"eta={e.tolist()}")
        cols.append(np.asarray(vals, dtype=float))
    values = np.stack(cols, axis=-1)
    labels = [f"table:mode{mode}:xi{r.tolist()}:eta{e.tolist()}"
              for r, e in zip(xi_rows, eta_rows)]

    def cost_fn(x_points):
        if len(x_points) != len(table.x_points) or \
                not np.allclose(x_points, table.x_points, atol=1e-12):
            raise MissingCost("table x points do not match the grid")
        return values

    return ModeControls(mode=mode, xi=xi_rows, eta=eta_rows, labels=labels,
                        cost_fn=cost_fn)


def controls_from_table(table: LagrangianTable) -> ModeControls:
    """Control list for one mode read off a numeric Lagrangian table.

    Uses every (xi, eta) grid pair whose value is finite at all stored x.
    """
    finite = np.all(np.isfinite(table.values), axis=0)
    pairs = np.nonzero(finite)
    if len(pairs[0]) == 0:
        raise MissingCost("table has no control with finite cost at every x")
    xi_rows = table.xi_grid[pairs[0]]
    eta_rows = table.eta_grid[pairs[1]]
    vals = table.values[:, pairs[0], pairs[1]]
    labels = [f"table:mode{table.mode}:xi{r.tolist()}:eta{e.tolist()}"
              for r, e in zip(xi_rows, eta_rows)]

    def cost_fn(x_points):
        if len(x_points) != len(table.x_points) or \
                not np.allclose(x_points, table.x_points, atol=1e-12):
            raise MissingCost("table x points do not match the grid")
        return vals

    return ModeControls(mode=table.mode, xi=xi_rows, eta=eta_rows,
                        labels=labels, cost_fn=cost_fn)


# ---------------------------------------------------------------------------
# assembled system
# ---------------------------------------------------------------------------

@dataclass
class DiscreteSystem:
    grid: TorusGrid
    m: int
    controls: ControlSet
    cost: list              # per mode, (S, A_i)
    label: str = ""
    drift_bound: float = 0.0

    @property
    def num_states(self):
        return self.grid.num_states

    def num_controls(self, i: int) -> int:
        return len(self.controls[i])

    @property
    def var_offsets(self) -> list:
        """Start of each mode's (x, a) block in the flat (i, x, a) order."""
        offs, acc = [], 0
        for i in range(self.m):
            offs.append(acc)
            acc += self.num_states * self.num_controls(i)
        return offs

    @property
    def total_vars(self) -> int:
        return sum(self.num_states * self.num_controls(i) for i in range(self.m))

    def cost_flat(self) -> np.ndarray:
        """Costs in the flat (i, x, a) variable order."""
        return np.concatenate([self.cost[i].reshape(-1) for i in range(self.m)])

    def var_index(self, i: int, x: int, a: int) -> int:
        return self.var_offsets[i] + x * self.num_controls(i) + a

    def var_tuple(self, idx: int):
        for i in reversed(range(self.m)):
            if idx >= self.var_offsets[i]:
                rem = idx - self.var_offsets[i]
                return i, rem // self.num_controls(i), rem % self.num_controls(i)
        raise IndexError(idx)


def assemble_system(model_or_label, grid: TorusGrid, controls: ControlSet,
                    label: str = "") -> DiscreteSystem:
    """Materialize the cost tensor and certify the monotone scheme.

    Verifies for every (i, x, a): finite cost, eta exactly in cone(i),
    diagonal coefficient sum_d |xi_d|/dx + eta_{a,i} >= 0 and nonpositive
    off-diagonal coefficients.  Rejects control sets that do not cover all
    modes.
    """
    if isinstance(model_or_label, HamiltonianModel):
        model = model_or_label
        m = model.m
        label = label or (model.zoo_id or "custom")
    else:
        model = None
        m = controls.m
        label = label or str(model_or_label)
    if controls.m != m or any(len(controls[i]) == 0 for i in range(m)):
        raise MissingCost("control set does not cover every mode")

    cost = []
    for i in range(m):
        mc = controls[i]
        if mc.cost_fn is None:
            raise MissingCost(f"mode {i} has no cost source")
        ci = np.asarray(mc.cost_fn(grid.x), dtype=float)
        if ci.shape != (grid.num_states, len(mc)):
            raise MissingCost(f"mode {i} cost tensor has shape {ci.shape}")
        if not np.all(np.isfinite(ci)):
            raise MissingCost(f"mode {i} has non-finite cost entries")
        for a in range(len(mc)):
            if not in_coupling_cone(mc.eta[a], i):
                raise CouplingOutsideCone(
                    f"mode {i} control {a} eta={mc.eta[a].tolist()}")
            diag = float(np.sum(np.abs(mc.xi[a])) * grid.N + mc.eta[a, i])
            if diag < 0.0:
                raise CouplingOutsideCone(
                    f"mode {i} control {a}: negative diagonal {diag}")
        cost.append(ci)
    drift = max(float(np.max(np.abs(controls[i].xi), initial=0.0))
                for i in range(m))
    return DiscreteSystem(grid=grid, m=m, controls=controls, cost=cost,
                          label=label, drift_bound=drift)


# ---------------------------------------------------------------------------
# upwind stencil, Bellman residual, linearized operator
# ---------------------------------------------------------------------------

def drift_stencil(grid: TorusGrid, xi):
    """Diagonal weight and (neighbor, weight) terms of xi . D_h.

    Weights are computed as |xi_d| * N once, here, so every consumer sees
    bit-identical coefficients.
    """
    diag = 0.0
    terms = []
    for d in range(grid.n):
        s = float(xi[d])
        if s == 0.0:
            continue
        w = abs(s) * grid.N
        diag += w
        nbr = grid.backward(d) if s > 0.0 else grid.forward(d)
        terms.append((nbr, -w))
    return diag, terms


def upwind_directional(u: ValueField, grid: TorusGrid, mode: int,
                       state: int, xi) -> float:
    """xi . D_h u_mode at one state (backward where xi_d > 0)."""
    diag, terms = drift_stencil(grid, xi)
    val = diag * u[mode, state]
    for nbr, w in terms:
        val += w * u[mode, nbr[state]]
    return float(val)


def directional_derivative(u_i: np.ndarray, grid: TorusGrid, xi) -> np.ndarray:
    """Vectorized xi . D_h over all states for one mode's values."""
    diag, terms = drift_stencil(grid, xi)
    val = diag * u_i
    for nbr, w in terms:
        val = val + w * u_i[nbr]
    return val


def control_values(sys: DiscreteSystem, lam: float, u: ValueField, i: int):
    """(A, S) array of lam*u_i + xi_a . D_h u_i + eta_a . u - L_i(., a)."""
    mc = sys.controls[i]
    out = np.empty((len(mc), sys.num_states))
    for a in range(len(mc)):
        diag, terms = drift_stencil(sys.grid, mc.xi[a])
        vals = (lam + diag) * u[i]
        for nbr, w in terms:
            vals = vals + w * u[i][nbr]
        vals = vals + mc.eta[a] @ u
        out[a] = vals - sys.cost[i][:, a]
    return out


def bellman_residual(sys: DiscreteSystem, lam: float, u: ValueField) -> ValueField:
    """Residual lam*u_i(x) + max_a [...] of the discrete system."""
    res = np.empty((sys.m, sys.num_states))
    for i in range(sys.m):
        res[i] = np.max(control_values(sys, lam, u, i), axis=0)
    return res


def bellman_policy(sys: DiscreteSystem, lam: float, u: ValueField):
    """Residual together with the argmax policy (ties to lowest index)."""
    res = np.empty((sys.m, sys.num_states))
    pol = np.empty((sys.m, sys.num_states), dtype=int)
    for i in range(sys.m):
        vals = control_values(sys, lam, u, i)
        pol[i] = np.argmax(vals, axis=0)
        res[i] = vals[pol[i], np.arange(sys.num_states)]
    return res, pol


def linearized_matrix(sys: DiscreteSystem, lam: float) -> np.ndarray:
    """Dense matrix of the per-control affine relations, rows in (i, x, a)
    order and columns in flat field order i*S + x.

    Row (i, x, a) applied to a field u gives
    lam*u_i(x) + xi_a . D_h u_i(x) + eta_a . u(x); subtracting the flat
    cost vector yields the per-control Bellman slack.  Its transpose is
    the closed-measure constraint matrix.
    """
    S, m = sys.num_states, sys.m
    A = np.zeros((sys.total_vars, m * S))
    states = np.arange(S)
    for i in range(m):
        mc = sys.controls[i]
        Ai = len(mc)
        base = sys.var_offsets[i]
        for a in range(Ai):
            rows = base + states * Ai + a
            diag, terms = drift_stencil(sys.grid, mc.xi[a])
            np.add.at(A, (rows, i * S + states), lam + diag)
            for nbr, w in terms:
                np.add.at(A, (rows, i * S + nbr), w)
            for j in range(m):
                if mc.eta[a, j] != 0.0:
                    np.add.at(A, (rows, j * S + states), mc.eta[a, j])
    return A


def policy_matrix(sys: DiscreteSystem, lam: float, policy: Policy) -> np.ndarray:
    """Rows of ``linearized_matrix`` selected by a policy, as (mS, mS)."""
    S = sys.num_states
    A = linearized_matrix(sys, lam)
    rows = np.empty(sys.m * S, dtype=int)
    for i in range(sys.m):
        Ai = sys.num_controls(i)
        rows[i * S:(i + 1) * S] = (sys.var_offsets[i]
                                   + np.arange(S) * Ai + policy[i])
    return A[rows]


def policy_cost(sys: DiscreteSystem, policy: Policy) -> np.ndarray:
    """Flat cost vector of a policy, field-ordered."""
    S = sys.num_states
    out = np.empty(sys.m * S)
    for i in range(sys.m):
        out[i * S:(i + 1) * S] = sys.cost[i][np.arange(S), policy[i]]
    return out


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def system_to_json(sys: DiscreteSystem) -> str:
    controls = []
    for i in range(sys.m):
        mc = sys.controls[i]
        for a in range(len(mc)):
            controls.append({"mode": i, "xi": mc.xi[a].tolist(),
                             "eta": mc.eta[a].tolist()})
    return json.dumps({
        "label": sys.label,
        "n": sys.grid.n,
        "N": sys.grid.N,
        "m": sys.m,
        "controls": controls,
        "cost": sys.cost_flat().tolist(),
    })


def system_from_json(text: str) -> DiscreteSystem:
    """Load a serialized system, re-verifying every invariant."""
    doc = json.loads(text)
    grid = build_grid(int(doc["n"]), int(doc["N"]))
    m = int(doc["m"])
    per_mode = [[] for _ in range(m)]
    for entry in doc["controls"]:
        per_mode[int(entry["mode"])].append(entry)
    modes = []
    for i in range(m):
        if not per_mode[i]:
            raise MissingCost(f"serialized system lacks controls for mode {i}")
        xi = np.array([e["xi"] for e in per_mode[i]], dtype=float)
        eta = np.array([e["eta"] for e in per_mode[i]], dtype=float)
        modes.append(ModeControls(mode=i, xi=xi, eta=eta,
                                  labels=[f"loaded:mode{i}:{a}"
                                          for a in range(len(xi))]))
    flat = np.asarray(doc["cost"], dtype=float)
    expect = sum(grid.num_states * len(mc) for mc in modes)
    if flat.shape != (expect,):
        raise MissingCost(f"cost vector has length {len(flat)}, expected {expect}")
    pos = 0
    for i, mc in enumerate(modes):
        block = flat[pos:pos + grid.num_states * len(mc)]
        pos += block.size
        ci = block.reshape(grid.num_states, len(mc))
        mc.cost_fn = (lambda x_points, _ci=ci: _ci)
    return assemble_system(doc.get("label", "loaded"), grid,
                           ControlSet(modes), label=doc.get("label", "loaded"))


# ---------------------------------------------------------------------------
# standard zoo systems
# ---------------------------------------------------------------------------

ZOO_CONTROL_DEFAULTS = {
    "constant-coupling": dict(N=4, xi_radius=1.0, xi_count=3),
    "linear-B": dict(N=8, xi_radius=1.0, xi_count=3),
    "quadratic-plc": dict(N=8, xi_radius=2.0, xi_count=9),
    "eikonal-f": dict(N=32, xi_radius=1.0, xi_count=3),
}


def default_eta_spec(model: HamiltonianModel, mode: int):
    zoo = model.zoo_id
    if zoo == "constant-coupling":
        e = np.zeros(model.m)
        e[mode] = 1.0
        return [e]
    if zoo == "linear-B":
        return [np.asarray(model.params["B"], dtype=float)[mode]]
    if zoo == "quadratic-plc":
        th = float(model.params["theta"])
        seg = np.zeros(model.m)
        seg[mode], seg[1 - mode] = th, -th
        return [np.zeros(model.m), seg]
    if zoo == "eikonal-f":
        return [np.zeros(model.m)]
    raise KeyError(f"no default controls for model {zoo!r}")


def standard_system(zoo_id: str, N: Optional[int] = None,
                    xi_radius: Optional[float] = None,
                    xi_count: Optional[int] = None,
                    **model_params) -> DiscreteSystem:
    """Assemble the canonical discrete instance of a zoo family."""
    from .model import make_model
    defaults = ZOO_CONTROL_DEFAULTS[zoo_id]
    model = make_model(zoo_id, **model_params)
    grid = build_grid(model.n, N if N is not None else defaults["N"])
    rad = xi_radius if xi_radius is not None else defaults["xi_radius"]
    cnt = xi_count if xi_count is not None else defaults["xi_count"]
    modes = [sample_controls(model, i, rad, cnt, default_eta_spec(model, i))
             for i in range(model.m)]
    return assemble_system(model, grid, ControlSet(modes))
