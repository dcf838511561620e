import numpy as np

from discountlab.lp import (INFEASIBLE, OPTIMAL, UNBOUNDED, LPProblem,
                            enumerate_basic_solutions, enumeration_minimum,
                            independent_rows, lp_solve)


def test_one_pivot_lp():
    sol = lp_solve(LPProblem(c=[-1.0, 0.0], A=[[1.0, 1.0]], b=[1.0],
                             senses=["="]))
    assert sol.status == OPTIMAL
    assert np.allclose(sol.x, [1.0, 0.0])
    assert sol.objective_value == -1.0


def test_infeasible_lp():
    sol = lp_solve(LPProblem(c=[0.0], A=[[1.0]], b=[-1.0], senses=["="]))
    assert sol.status == INFEASIBLE


def test_unbounded_lp_with_ray():
    # min -x1 with only x2 pinned: x1 can grow without bound
    sol = lp_solve(LPProblem(c=[-1.0, 0.0], A=[[0.0, 1.0]], b=[1.0],
                             senses=["="]))
    assert sol.status == UNBOUNDED
    assert sol.ray is not None and sol.ray[0] > 0


def test_free_variable_split():
    # max x (min -x) with x free and x <= 3: optimum at 3
    sol = lp_solve(LPProblem(c=[-1.0], A=[[1.0]], b=[3.0], senses=["<="],
                             free=[True]))
    assert sol.status == OPTIMAL
    assert abs(sol.x[0] - 3.0) <= 1e-12
    # and with the sign flipped the free part matters: max -x s.t. -x <= 5
    sol = lp_solve(LPProblem(c=[1.0], A=[[-1.0]], b=[5.0], senses=["<="],
                             free=[True]))
    assert abs(sol.x[0] + 5.0) <= 1e-12


def test_degenerate_zero_rhs():
    # x1 - x2 = 0, x1 + x2 <= 1, min x1 - 2 x2: optimum (0.5, 0.5)
    sol = lp_solve(LPProblem(c=[1.0, -2.0], A=[[1.0, -1.0], [1.0, 1.0]],
                             b=[0.0, 1.0], senses=["=", "<="]))
    assert sol.status == OPTIMAL
    assert np.allclose(sol.x, [0.5, 0.5], atol=1e-10)


def test_beale_style_degeneracy_terminates():
    # classic degenerate cycling data; Bland's fallback must terminate
    A = [[0.25, -60.0, -1.0 / 25.0, 9.0],
         [0.5, -90.0, -1.0 / 50.0, 3.0],
         [0.0, 0.0, 1.0, 0.0]]
    b = [0.0, 0.0, 1.0]
    c = [-0.75, 150.0, -0.02, 6.0]
    sol = lp_solve(LPProblem(c=c, A=A, b=b, senses=["<="] * 3))
    assert sol.status == OPTIMAL
    # oracle: enumerate the slacked standard form
    A_std = np.hstack([np.asarray(A), np.eye(3)])
    val, _ = enumeration_minimum(A_std, np.asarray(b),
                                 np.concatenate([c, np.zeros(3)]))
    assert abs(sol.objective_value - val) <= 1e-9


def test_certification_fields_present():
    sol = lp_solve(LPProblem(c=[1.0, 1.0], A=[[1.0, 2.0]], b=[2.0],
                             senses=["="]))
    assert sol.status == OPTIMAL
    assert sol.feasibility_residual <= 1e-9
    assert sol.slackness_residual <= 1e-8
    assert sol.dual is not None and sol.dual.shape == (1,)


def test_duals_certify_objective():
    rng = np.random.default_rng(11)
    for _ in range(20):
        m, n = 3, 7
        A = rng.standard_normal((m, n))
        x0 = rng.uniform(0.2, 1.0, n)
        b = A @ x0
        c = rng.uniform(0.1, 1.0, n)
        sol = lp_solve(LPProblem(c=c, A=A, b=b, senses=["="] * m))
        assert sol.status == OPTIMAL
        # strong duality: b . y equals the optimal value
        assert abs(float(b @ sol.dual) - sol.objective_value) <= 1e-8


def test_random_lps_match_vertex_enumeration():
    rng = np.random.default_rng(12)
    solved = 0
    while solved < 60:
        m = int(rng.integers(2, 7))
        n = int(rng.integers(m + 1, 13))
        A = rng.standard_normal((m, n))
        x0 = rng.uniform(0.0, 1.0, n)
        b = A @ x0
        c = rng.uniform(0.05, 1.0, n)
        sol = lp_solve(LPProblem(c=c, A=A, b=b, senses=["="] * m))
        assert sol.status == OPTIMAL
        val, _ = enumeration_minimum(A, b, c)
        assert val is not None
        assert abs(sol.objective_value - val) <= 1e-9
        solved += 1


def test_independent_rows():
    A = np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 1.0]])
    Ar, rows = independent_rows(A)
    assert rows == [0, 2]
    assert Ar.shape == (2, 2)


def test_enumerate_simplex_vertices():
    A = np.array([[1.0, 1.0, 1.0]])
    verts = enumerate_basic_solutions(A, np.array([1.0]))
    uniq = {tuple(np.round(v, 9)) for v in verts}
    assert uniq == {(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)}


def test_enumeration_infeasible_returns_none():
    val, vert = enumeration_minimum(np.array([[1.0, 1.0]]),
                                    np.array([-1.0]), np.array([1.0, 1.0]))
    assert val is None and vert is None


def test_certification_under_row_scaling():
    rng = np.random.default_rng(77)
    for _ in range(25):
        m, n = 4, 9
        A = rng.standard_normal((m, n)) * (10.0 ** rng.integers(-2, 4, (m, 1)))
        x0 = rng.uniform(0.1, 1.0, n)
        b = A @ x0
        c = rng.uniform(0.05, 1.0, n)
        sol = lp_solve(LPProblem(c=c, A=A, b=b, senses=["="] * m))
        assert sol.status == OPTIMAL
        val, _ = enumeration_minimum(A, b, c)
        assert abs(sol.objective_value - val) <= 1e-7 * max(1.0, abs(val))


def test_mixed_senses_and_free_vars_against_enumeration():
    rng = np.random.default_rng(78)
    for _ in range(25):
        m, n = 3, 6
        A = rng.standard_normal((m, n))
        x0 = rng.uniform(0.1, 1.0, n)
        slack = rng.uniform(0.0, 0.5, m)
        senses = ["=", "<=", "<="]
        b = A @ x0 + np.where([s == "<=" for s in senses], slack, 0.0)
        c = rng.uniform(0.05, 1.0, n)
        sol = lp_solve(LPProblem(c=c, A=A, b=b, senses=senses))
        assert sol.status == OPTIMAL
        A_std = np.hstack([A, np.eye(m)[:, 1:]])
        c_std = np.concatenate([c, np.zeros(m - 1)])
        val, _ = enumeration_minimum(A_std, b, c_std)
        assert abs(sol.objective_value - val) <= 1e-9
