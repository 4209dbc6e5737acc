import cvxpy as cp
import numpy as np
import pytest

from cfsim.exception import PowerControlException
from cfsim.framework.estimation import estimation_stats
from cfsim.framework import power_control
from cfsim.framework.power_control import uniform_eta, maxmin_eta, check_power_constraint, CONSTRAINT_SLACK, \
    available_solvers, _FeasibilityProblem
from cfsim.framework.rates import statistical_sinr

GRID = np.linspace(0.0, 1.0, 200)


def instance(seed: int, num_aps: int, num_users: int):
    beta = np.random.default_rng(seed).uniform(0.5, 5.0, size=(num_aps, num_users))
    return beta, estimation_stats(beta, num_users, 1.0).gamma


def test_uniform_eta():
    np.testing.assert_allclose(uniform_eta(np.array([[0.5], [0.25]])).eta, [[2.0], [4.0]])
    np.testing.assert_allclose(uniform_eta(np.array([[0.2, 0.3]])).eta, [[2.0, 2.0]])
    with pytest.raises(ValueError):
        uniform_eta(np.array([[0.2, 0.3], [0.0, 0.0]]))


def test_check_power_constraint():
    _, gamma = instance(0, 6, 3)
    eta = uniform_eta(gamma).eta
    ok, margins = check_power_constraint(eta, gamma)
    assert ok
    np.testing.assert_allclose(margins, 0.0, atol=1e-12)

    ok, margins = check_power_constraint(2 * eta, gamma)
    assert not ok
    np.testing.assert_allclose(margins, -1.0)

    # Within the slack still passes
    assert check_power_constraint(eta * (1 + CONSTRAINT_SLACK / 10), gamma)[0]


def test_maxmin_single_user_grid():
    beta, gamma = instance(1, 2, 1)
    rho_d = 2.0
    best = 0.0
    for x1 in GRID:
        for x2 in GRID:
            eta = np.array([[x1 ** 2], [x2 ** 2]]) / gamma
            best = max(best, statistical_sinr(beta, gamma, eta, rho_d)[0])
    result = maxmin_eta(beta, gamma, rho_d)
    assert result.min_sinr == pytest.approx(best, rel=0.005)
    assert check_power_constraint(result.eta, gamma)[0]


def test_maxmin_two_users_grid():
    beta, gamma = instance(2, 2, 2)
    rho_d = 2.0
    # Both APs at full power, the split between the users swept on a grid of angles
    angles = GRID * np.pi / 2
    best = 0.0
    for theta1 in angles:
        for theta2 in angles:
            x = np.array([[np.cos(theta1), np.sin(theta1)], [np.cos(theta2), np.sin(theta2)]])
            best = max(best, np.min(statistical_sinr(beta, gamma, x ** 2 / gamma, rho_d)))
    result = maxmin_eta(beta, gamma, rho_d)
    assert result.min_sinr >= best * (1 - 0.005)
    assert result.min_sinr == pytest.approx(np.min(statistical_sinr(beta, gamma, result.eta, rho_d)))


def test_maxmin_symmetric_instance():
    beta = np.full((6, 3), 2.0)
    gamma = estimation_stats(beta, 3, 1.0).gamma
    result = maxmin_eta(beta, gamma, 5.0)
    sinr = statistical_sinr(beta, gamma, result.eta, 5.0)
    np.testing.assert_allclose(sinr, sinr.max(), rtol=2e-3)


def test_maxmin_beats_uniform():
    beta, gamma = instance(3, 12, 4)
    rho_d = 10.0
    uniform = np.min(statistical_sinr(beta, gamma, uniform_eta(gamma).eta, rho_d))
    result = maxmin_eta(beta, gamma, rho_d)
    assert result.min_sinr >= uniform
    ok, margins = check_power_constraint(result.eta, gamma)
    assert ok
    assert np.all(result.eta >= 0)


def test_maxmin_scaling_invariance():
    beta, gamma = instance(4, 8, 3)
    reference = maxmin_eta(beta, gamma, 4.0)
    scaled = maxmin_eta(100.0 * beta, 100.0 * gamma, 0.04)
    assert scaled.min_sinr == pytest.approx(reference.min_sinr, rel=2e-3)


def test_maxmin_not_converged():
    beta, gamma = instance(5, 8, 3)
    with pytest.raises(PowerControlException) as info:
        maxmin_eta(beta, gamma, 10.0, tol=1e-9, max_iter=1)
    lo, hi = info.value.bracket
    assert lo < hi
    assert info.value.best is not None
    assert check_power_constraint(info.value.best.eta, gamma)[0]


def test_maxmin_rejects():
    beta, gamma = instance(6, 4, 2)
    with pytest.raises(ValueError):
        maxmin_eta(beta, gamma, 0.0)
    with pytest.raises(ValueError):
        maxmin_eta(beta, gamma, 1.0, tol=0.0)


def test_solver_failure_falls_back(monkeypatch):
    solvers = available_solvers()
    if len(solvers) < 2:
        pytest.skip("needs a second SOCP solver")
    beta, gamma = instance(7, 6, 2)
    original = cp.Problem.solve

    def failing_primary(self, *args, **kwargs):
        if kwargs.get("solver") == solvers[0]:
            raise cp.error.SolverError(f"Solver '{solvers[0]}' failed.")
        return original(self, *args, **kwargs)

    monkeypatch.setattr(cp.Problem, "solve", failing_primary)
    uniform = np.min(statistical_sinr(beta, gamma, uniform_eta(gamma).eta, 2.0))
    status, x = _FeasibilityProblem(beta, gamma, 2.0).solve(uniform / 2)
    assert status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)
    assert x is not None


def test_inconclusive_target_counts_as_infeasible(monkeypatch):
    beta, gamma = instance(8, 10, 3)
    rho_d = 5.0
    reference = maxmin_eta(beta, gamma, rho_d)
    original = _FeasibilityProblem.solve
    targets = []

    def first_target_fails(self, t):
        targets.append(t)
        if len(targets) == 1:
            return None, None
        return original(self, t)

    monkeypatch.setattr(_FeasibilityProblem, "solve", first_target_fails)
    result = maxmin_eta(beta, gamma, rho_d)
    assert check_power_constraint(result.eta, gamma)[0]
    assert result.min_sinr <= reference.min_sinr * (1 + 2e-3)
    uniform = np.min(statistical_sinr(beta, gamma, uniform_eta(gamma).eta, rho_d))
    assert result.min_sinr >= uniform


def test_every_solver_failing_keeps_uniform(monkeypatch):
    beta, gamma = instance(9, 6, 3)

    def always_fails(self, *args, **kwargs):
        raise cp.error.SolverError("failed")

    monkeypatch.setattr(cp.Problem, "solve", always_fails)
    result = maxmin_eta(beta, gamma, 3.0)
    np.testing.assert_allclose(result.eta, uniform_eta(gamma).eta)
    assert result.min_sinr == pytest.approx(np.min(statistical_sinr(beta, gamma, result.eta, 3.0)))


def test_no_solver_installed(monkeypatch):
    monkeypatch.setattr(power_control.cp, "installed_solvers", lambda: [])
    with pytest.raises(PowerControlException):
        available_solvers()


def test_solver_tolerances():
    for options in power_control.SOLVER_OPTIONS.values():
        assert min(v for k, v in options.items() if k != "max_iters") == power_control.FEASIBILITY_TOL == 1e-7
