import numpy as np
import pytest

from oracles import active_set_qp_oracle, qp_objective
from tpmsvm import QpProblem, interior_index_set, solve_box_simplex_qp
from tpmsvm.errors import InvalidInput, NumericsWarning
from tpmsvm.qp import INFEASIBLE, OPTIMAL, default_margin_tol


def random_problem(rng, m, psd_rank=None):
    rank = psd_rank or m
    B = rng.normal(size=(rank, m))
    Q = B.T @ B
    Q = np.triu(Q) + np.triu(Q, 1).T
    q = rng.normal(size=m)
    ub = float(rng.uniform(0.2, 1.5))
    nu = float(rng.uniform(0.1, 0.95)) * m * ub
    return QpProblem(Q, q, nu, ub)


def test_symmetric_identity_instance():
    sol = solve_box_simplex_qp(QpProblem(np.eye(2), np.zeros(2), 1.0, 1.0))
    assert sol.status == OPTIMAL
    np.testing.assert_allclose(sol.lam, [0.5, 0.5], atol=1e-12)


def test_bounds_force_unique_point():
    sol = solve_box_simplex_qp(QpProblem(np.eye(2), np.zeros(2), 1.0, 0.5))
    assert sol.status == OPTIMAL
    np.testing.assert_allclose(sol.lam, [0.5, 0.5], atol=0)


def test_matches_active_set_oracle():
    rng = np.random.default_rng(0)
    for trial in range(60):
        m = int(rng.integers(2, 7))
        prob = random_problem(rng, m, psd_rank=int(rng.integers(1, m + 1)))
        sol = solve_box_simplex_qp(prob)
        assert sol.status == OPTIMAL
        _, ref = active_set_qp_oracle(prob.Q, prob.q, prob.nu, prob.ub)
        assert sol.objective == pytest.approx(ref, abs=1e-8 * max(1.0, abs(ref)))


def test_solution_feasibility_invariants():
    rng = np.random.default_rng(1)
    for _ in range(40):
        m = int(rng.integers(2, 40))
        prob = random_problem(rng, m)
        sol = solve_box_simplex_qp(prob)
        assert sol.status == OPTIMAL
        assert abs(sol.lam.sum() - prob.nu) <= 1e-9 * prob.nu
        assert np.all(sol.lam >= -1e-12)
        assert np.all(sol.lam <= prob.ub + 1e-12)
        assert sol.kkt_residual <= 1e-8


def test_infeasible_when_nu_exceeds_capacity():
    sol = solve_box_simplex_qp(QpProblem(np.eye(3), np.zeros(3), 4.0, 1.0))
    assert sol.status == INFEASIBLE


def test_nonfinite_rejected():
    with pytest.raises(InvalidInput):
        QpProblem(np.array([[np.nan, 0], [0, 1.0]]), np.zeros(2), 1.0, 1.0)
    with pytest.raises(InvalidInput):
        QpProblem(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2), 1.0, 1.0)


def test_permutation_equivariance():
    rng = np.random.default_rng(2)
    for _ in range(10):
        m = 8
        prob = random_problem(rng, m)
        perm = rng.permutation(m)
        permuted = QpProblem(prob.Q[np.ix_(perm, perm)], prob.q[perm], prob.nu, prob.ub)
        sol = solve_box_simplex_qp(prob)
        sol_p = solve_box_simplex_qp(permuted)
        np.testing.assert_allclose(sol_p.lam, sol.lam[perm], atol=1e-7)


def test_monotone_objective_iterates():
    # coordinate-exchange steps maximize along each direction, so tracked
    # objectives never decrease
    rng = np.random.default_rng(3)
    prob = random_problem(rng, 25)
    seen = []
    for cap in range(1, 120, 3):
        sol = solve_box_simplex_qp(prob, max_iter=cap)
        seen.append(qp_objective(prob.Q, prob.q, sol.lam))
    assert all(b >= a - 1e-12 for a, b in zip(seen, seen[1:]))


def test_psd_repair_warns_and_solves():
    Q = np.array([[1.0, 0.0], [0.0, -0.5]])
    with pytest.warns(NumericsWarning):
        sol = solve_box_simplex_qp(QpProblem(Q, np.zeros(2), 1.0, 1.0))
    assert sol.repair_jitter > 0
    assert sol.status == OPTIMAL


def test_interior_index_set_examples():
    class Sol:
        pass

    sol = Sol()
    sol.lam = np.array([0.5, 0.5])
    assert list(interior_index_set(sol, 1.0, 1e-6)) == [0, 1]
    assert list(interior_index_set(sol, 0.5, 1e-6)) == []
    sol.lam = np.array([0.0, 0.3, 0.7])
    assert list(interior_index_set(sol, 0.7, 1e-6)) == [1]


def test_default_margin_tol():
    assert default_margin_tol(0.25) == 0.25e-6
