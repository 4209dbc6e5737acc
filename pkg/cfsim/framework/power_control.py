from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import cvxpy as cp
import numpy as np

from cfsim.exception import PowerControlException
from cfsim.framework.rates import statistical_sinr

cfsimlog = logging.getLogger(__name__)

# Slack allowed on the per-AP constraint sum_k eta_mk gamma_mk <= 1
CONSTRAINT_SLACK = 1e-9
# Primal feasibility and duality gap tolerance handed to the SOCP solvers
FEASIBILITY_TOL = 1e-7
# Tried in this order until one gives a conclusive answer
SOLVER_OPTIONS = {
    cp.CLARABEL: dict(tol_feas=FEASIBILITY_TOL, tol_gap_abs=FEASIBILITY_TOL, tol_gap_rel=FEASIBILITY_TOL),
    cp.ECOS: dict(feastol=FEASIBILITY_TOL, abstol=FEASIBILITY_TOL, reltol=FEASIBILITY_TOL),
    cp.SCS: dict(eps_abs=FEASIBILITY_TOL, eps_rel=FEASIBILITY_TOL, max_iters=20000),
}
_CONCLUSIVE = (cp.OPTIMAL, cp.INFEASIBLE)


class PowerPolicy(Enum):
    UNIFORM = "uniform"
    MAXMIN = "maxmin"


@dataclass
class PowerCoefficients:
    """
    Power control coefficients eta (M x K). min_sinr is the smallest statistical-CSI SINR they achieve.
    """
    eta: np.ndarray
    min_sinr: float = None


def check_power_constraint(eta: np.ndarray, gamma: np.ndarray) -> tuple[bool, np.ndarray]:
    """
    Checks sum_k eta_mk gamma_mk <= 1 for every AP.
    :return: (True if every AP satisfies the constraint, per-AP margins 1 - sum_k eta_mk gamma_mk)
    """
    margins = 1.0 - np.sum(np.asarray(eta) * np.asarray(gamma), axis=1)
    return bool(np.all(margins >= -CONSTRAINT_SLACK)), margins


def uniform_eta(gamma: np.ndarray) -> PowerCoefficients:
    """
    Every AP transmits at full power and gives each user the same eta_mk = 1 / sum_k gamma_mk.
    """
    gamma = np.asarray(gamma, dtype=float)
    row_sums = gamma.sum(axis=1)
    if np.any(row_sums <= 0):
        raise ValueError(f"[-] APs {np.flatnonzero(row_sums <= 0).tolist()} have no channel estimate to any user.")
    eta = np.repeat((1.0 / row_sums)[:, np.newaxis], gamma.shape[1], axis=1)
    return PowerCoefficients(eta)


class _FeasibilityProblem:
    """
    Second-order-cone feasibility test "min_k SINR_k >= t" in the variables x_mk = sqrt(eta_mk gamma_mk).

    With a_mk = sqrt(rho_d gamma_mk) and b_mk = sqrt(rho_d beta_mk) the statistical SINR reads
    (sum_m a_mk x_mk)^2 / (sum_m b_mk^2 r_m^2 + 1), where r_m = ||x_m|| <= 1 is the amplitude radiated by AP m.
    The problem is built once, only the parameter 1/sqrt(t) changes between bisection steps.
    """
    def __init__(self, beta: np.ndarray, gamma: np.ndarray, rho_d: float):
        num_aps, num_users = gamma.shape
        a = np.sqrt(rho_d * gamma)
        b = np.sqrt(rho_d * beta)

        self.x = cp.Variable((num_aps, num_users), nonneg=True)
        self.r = cp.Variable(num_aps, nonneg=True)
        self.inv_sqrt_t = cp.Parameter(nonneg=True)

        signal = cp.sum(cp.multiply(a, self.x), axis=0)
        interference = cp.vstack([cp.diag(self.r) @ b, np.ones((1, num_users))])
        constraints = [
            cp.SOC(self.inv_sqrt_t * signal, interference, axis=0),
            cp.SOC(self.r, self.x, axis=1),
            self.r <= 1.0,
        ]
        self.problem = cp.Problem(cp.Minimize(0), constraints)

    def solve(self, t: float) -> tuple[str, np.ndarray]:
        """
        Tests target t with every installed solver of SOLVER_OPTIONS in turn.
        :return: (status, x) of the first conclusive answer, else of the last answer. (None, None) if every solver
                 raised
        """
        self.inv_sqrt_t.value = 1.0 / np.sqrt(t)
        status, x = None, None
        for solver in available_solvers():
            try:
                self.problem.solve(solver=solver, **SOLVER_OPTIONS[solver])
            except cp.error.SolverError as e:
                cfsimlog.debug(f"[!] {solver} failed at SINR target {t:.6g}: {e}")
                continue
            status, x = self.problem.status, self.x.value
            if status in _CONCLUSIVE:
                break
            cfsimlog.debug(f"[!] {solver} returned '{status}' at SINR target {t:.6g}")
        return status, x


def available_solvers() -> list[str]:
    solvers = [solver for solver in SOLVER_OPTIONS if solver in cp.installed_solvers()]
    if len(solvers) == 0:
        raise PowerControlException(f"[-] None of the SOCP solvers {', '.join(SOLVER_OPTIONS)} is installed.")
    return solvers


def _eta_from_amplitudes(x: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, None)
    # Solver tolerances may leave ||x_m|| marginally above 1
    norms = np.linalg.norm(x, axis=1)
    x = x / np.maximum(norms, 1.0)[:, np.newaxis]
    eta = np.zeros_like(gamma)
    positive = gamma > 0
    eta[positive] = x[positive] ** 2 / gamma[positive]
    return eta


def maxmin_eta(beta: np.ndarray, gamma: np.ndarray, rho_d: float, tol: float = 1e-3,
               max_iter: int = 100) -> PowerCoefficients:
    """
    Max-min fairness power control for the statistical-CSI SINR, found by bisection over the common SINR target.
    Every step solves a second-order-cone feasibility problem, a target without a conclusive solver answer counts as
    infeasible. Raises PowerControlException when the bracket does not close within max_iter steps.
    :param tol: Relative width of the final SINR bracket
    :param max_iter: Maximum number of feasibility problems
    :return: Coefficients that reach the lower end of the final bracket
    """
    if rho_d <= 0 or tol <= 0:
        raise ValueError(f"[-] rho_d and tol must be positive (got rho_d={rho_d}, tol={tol}).")
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)

    best = uniform_eta(gamma)
    best.min_sinr = float(np.min(statistical_sinr(beta, gamma, best.eta, rho_d)))
    lo = best.min_sinr
    # Noise-only bound: user k alone, every AP at full power
    hi = float(np.min(np.sum(np.sqrt(rho_d * gamma), axis=0) ** 2))
    cfsimlog.debug(f"[!] Max-min bisection starts with bracket [{lo:.6g}, {hi:.6g}]")

    feasibility = _FeasibilityProblem(beta, gamma, rho_d)
    for iteration in range(max_iter):
        if hi - lo <= tol * hi:
            break
        t = (lo + hi) / 2.0
        status, x = feasibility.solve(t)
        eta = _eta_from_amplitudes(x, gamma) if x is not None else None
        achieved = float(np.min(statistical_sinr(beta, gamma, eta, rho_d))) if eta is not None else -np.inf
        if (status == cp.OPTIMAL and eta is not None) or (status == cp.OPTIMAL_INACCURATE and achieved >= t):
            lo = t
            if achieved > best.min_sinr:
                best = PowerCoefficients(eta, achieved)
        else:
            if status != cp.INFEASIBLE:
                cfsimlog.warning(f"[!] No conclusive solver answer at SINR target {t:.6g} (status '{status}'), "
                                 f"treated as infeasible")
            hi = t
        cfsimlog.debug(f"[!] Bisection step {iteration}: target {t:.6g} {status}, bracket [{lo:.6g}, {hi:.6g}]")
    else:
        if hi - lo > tol * hi:
            raise PowerControlException(
                f"[-] Max-min bisection did not converge within {max_iter} iterations (bracket [{lo:.6g}, {hi:.6g}]).",
                best=best, bracket=(lo, hi))

    ok, margins = check_power_constraint(best.eta, gamma)
    if not ok:
        raise PowerControlException(f"[-] Max-min coefficients violate the per-AP power constraint "
                                    f"(worst margin {margins.min():.3g}).", best=best, bracket=(lo, hi))
    cfsimlog.info(f"[+] Max-min power control: min SINR {best.min_sinr:.6g} (bracket [{lo:.6g}, {hi:.6g}])")
    return best
