import numpy as np
import pytest

import discountlab as dl
from discountlab.discretize import bellman_policy
from discountlab.errors import (BadValue, NotASubsolution, NotASupersolution)
from discountlab.solver import policy_evaluate


def test_value_iterate_closed_forms(instance_a):
    u, diag = dl.value_iterate(instance_a, 1.0, None, tol=1e-10)
    assert np.max(np.abs(u + 0.5)) <= 1e-10
    u, _ = dl.value_iterate(instance_a, 0.25, None, tol=1e-10)
    assert np.max(np.abs(u + 0.8)) <= 1e-10
    assert diag.final_residual <= 1e-10


def test_value_iterate_arbitrary_start(instance_a, rng):
    u0 = rng.standard_normal((2, 4)) * 3
    u, _ = dl.value_iterate(instance_a, 0.5, u0, tol=1e-11)
    up, _, _ = dl.policy_iterate(instance_a, 0.5, tol=1e-12)
    assert np.max(np.abs(u - up)) <= 1e-10


def test_value_vs_policy_iteration_cross_oracle(instance_b):
    uv, _ = dl.value_iterate(instance_b, 0.5, None, tol=1e-10)
    up, _, _ = dl.policy_iterate(instance_b, 0.5, tol=1e-10)
    assert np.max(np.abs(uv - up)) <= 1e-9


def test_policy_evaluate_constant_controls(instance_a):
    for lam in (1.0, 0.25):
        for a in (1, 2):   # xi = 0 and xi = 1: drift dies on constants
            pol = np.full((2, 4), a, dtype=int)
            u = policy_evaluate(instance_a, lam, pol)
            assert np.max(np.abs(u + 1.0 / (1.0 + lam))) <= 1e-12


def _shrunken_b():
    return dl.standard_system("quadratic-plc", N=4, xi_radius=2.0, xi_count=3)


def test_policy_iterate_matches_exhaustive_enumeration():
    """Every stationary policy of a shrunken instance is evaluated; the
    pointwise minimum over policies is the solver value (min-cost
    orientation)."""
    sys_ = _shrunken_b()
    lam = 0.5
    S, m = sys_.num_states, sys_.m
    A_ctrl = sys_.num_controls(0)
    assert A_ctrl == 6 and S == 4 and m == 2

    from discountlab.discretize import linearized_matrix
    V = linearized_matrix(sys_, lam)       # (m*S*A, m*S) rows in (i,x,a)
    rows = np.asarray([[V[sys_.var_index(i, x, a)]
                        for a in range(A_ctrl)]
                       for i in range(m) for x in range(S)])
    costs = np.asarray([[sys_.cost[i][x, a] for a in range(A_ctrl)]
                        for i in range(m) for x in range(S)])

    n_slots = m * S
    total = A_ctrl ** n_slots
    best = np.full(m * S, np.inf)
    chunk = 1 << 16
    slot_idx = np.arange(n_slots)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total))
        digits = (codes[:, None] // (A_ctrl ** slot_idx)) % A_ctrl
        mats = rows[slot_idx, digits]              # (batch, mS, mS)
        rhs = costs[slot_idx, digits][..., None]   # (batch, mS, 1)
        vals = np.linalg.solve(mats, rhs)[..., 0]
        best = np.minimum(best, np.min(vals, axis=0))
    u, _, _ = dl.policy_iterate(sys_, lam, tol=1e-11)
    assert np.max(np.abs(best.reshape(m, S) - u)) <= 1e-10


def test_policy_iteration_values_nonincreasing(instance_b):
    lam = 0.5
    _, policy = bellman_policy(instance_b, lam, np.zeros((2, 8)))
    prev = None
    for _ in range(30):
        u = policy_evaluate(instance_b, lam, policy)
        if prev is not None:
            assert np.all(u <= prev + 1e-11)
        prev = u
        _, policy = bellman_policy(instance_b, lam, u)
    assert np.max(np.abs(dl.bellman_residual(instance_b, lam, prev))) <= 1e-9


def test_small_lambda_policy_iteration(instance_b):
    u, _, diag = dl.policy_iterate(instance_b, 1e-3, tol=1e-10)
    assert diag.final_residual <= 1e-9
    uv, _ = dl.value_iterate(instance_b, 1e-3, u + 0.01, tol=1e-9)
    assert np.max(np.abs(u - uv)) <= 1e-6 / 1e-3 * 1e-3  # 1e-6 slack


def test_comparison_check_examples(instance_a):
    sub = np.full((2, 4), -2.0)
    sup = np.zeros((2, 4))
    assert dl.comparison_check(instance_a, 1.0, sub, sup)
    with pytest.raises(NotASubsolution):
        dl.comparison_check(instance_a, 1.0, np.zeros((2, 4)), sup)
    with pytest.raises(NotASupersolution):
        dl.comparison_check(instance_a, 1.0, sub, np.full((2, 4), -2.0))


def test_comparison_shifted_solution(instance_b):
    v, _, _ = dl.policy_iterate(instance_b, 0.5, tol=1e-11)
    assert dl.comparison_check(instance_b, 0.5, v - 0.1, v + 0.1)


def test_solution_shift_residual_bound(instance_b):
    v, _, _ = dl.policy_iterate(instance_b, 0.5, tol=1e-11)
    for c in (0.05, 0.4, 2.0):
        res = dl.bellman_residual(instance_b, 0.5, v + c)
        assert np.all(res >= 0.5 * c - 1e-9)


# ---------------------------------------------------------------------------
# ergodic suite
# ---------------------------------------------------------------------------

def test_ergodic_map_decoupled_constant():
    sys_ = dl.standard_system("eikonal-f", f_const=2.0, f_amp=0.0, N=8)
    lam = 0.5
    v, tu, c = dl.ergodic_map(sys_, lam, np.zeros((1, 8)))
    assert np.max(np.abs(v - 2.0 / lam)) <= 1e-10
    assert np.max(np.abs(tu)) <= 1e-10
    assert np.allclose(c, [-2.0], atol=1e-10)


def test_ergodic_map_constant_coupling(instance_a):
    # coupling slot frozen at u = 0 leaves lam*v + 1 = 0
    lam = 0.25
    v, tu, c = dl.ergodic_map(instance_a, lam, np.zeros((2, 4)))
    assert np.max(np.abs(v + 1.0 / lam)) <= 1e-9
    assert np.max(np.abs(tu)) <= 1e-9
    assert np.allclose(c, [1.0, 1.0], atol=1e-9)


def test_ergodic_solve_constant_coupling(instance_a):
    res = dl.ergodic_solve(instance_a, 0.25, tol=1e-10)
    assert np.allclose(res.c, [1.0, 1.0], atol=1e-8)
    assert np.max(np.abs(res.u)) <= 1e-8
    assert res.residual <= 1e-8


def test_ergodic_solve_eikonal_refinement():
    for N in (64, 512):
        sys_ = dl.standard_system("eikonal-f", N=N)
        res = dl.ergodic_solve(sys_, 0.05, tol=1e-9)
        assert abs(res.c[0] + 1.0) <= 3.0 / N + 2 * 0.05
        assert res.residual <= 1e-6
        assert np.min(res.u, axis=1).tolist() == [0.0]


def test_ergodic_normalization_exact_minimum(instance_b):
    res = dl.ergodic_solve(instance_b, 0.05, tol=1e-10)
    assert np.array_equal(np.min(res.u, axis=1), np.zeros(2))


def test_ergodic_solve_rejects_bad_damping(instance_a):
    with pytest.raises(BadValue):
        dl.ergodic_solve(instance_a, 0.25, damping=0.0)


def test_policy_evaluate_iterative_path_matches_dense(instance_b, monkeypatch):
    import discountlab.solver as solver_mod
    lam = 0.5
    _, pol, _ = dl.policy_iterate(instance_b, lam, tol=1e-10)
    dense = policy_evaluate(instance_b, lam, pol)
    monkeypatch.setattr(solver_mod, "DENSE_LIMIT", 0)
    iterative = policy_evaluate(instance_b, lam, pol)
    assert np.max(np.abs(dense - iterative)) <= 1e-9


def test_ergodic_solve_linear_b(instance_linear_b):
    # zero row sums leave an additive freedom; the normalization in the
    # fixed-point map pins it and the residual identity still holds
    res = dl.ergodic_solve(instance_linear_b, 0.05, tol=1e-10)
    assert res.residual <= 1e-8
    assert np.array_equal(np.min(res.u, axis=1), np.zeros(2))
    direct = dl.bellman_residual(instance_linear_b, 0.0, res.u) \
        - res.c[:, None]
    assert np.max(np.abs(direct)) <= 1e-8
