"""False-reject exponent of the threshold test.

The exponent is a minimum, over pairs of candidate sets ``(C, D)``, of a
convex program: the KL cost of moving the true laws to an ``M``-tuple ``Q``
under which both ``C`` and ``D`` score at most ``lambda``. Both the cost and
the score functional are convex in ``Q``, so any KKT point is a global
minimum; SLSQP on the product of simplices finds it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .detector import dispersion
from .distributions import Distribution
from .hypotheses import OutlierSet, complement
from .theory import Scenario, truth_masses

CONSTRAINT_TOL = 1e-8
N_RANDOM_STARTS = 5
FLOOR = 1e-300


class SolverNonConvergence(RuntimeError):
    """No start converged; ``best`` holds the best feasible point found."""

    def __init__(self, message, best=None, gap=None):
        super().__init__(message)
        self.best = best
        self.gap = gap


@dataclass(frozen=True)
class LdProblem:
    scenario: Scenario
    B: OutlierSet
    lam: float
    C: OutlierSet
    D: OutlierSet

    def __post_init__(self):
        if self.C == self.D:
            raise ValueError("the two constrained sets must differ")
        if not self.lam > 0:
            raise ValueError(f"threshold must be positive, got {self.lam}")


@dataclass(frozen=True, eq=False)
class LdSolution:
    value: float
    minimizer: list
    pair: tuple
    feasible: bool
    converged: bool = True


def _kl_cost(Q: np.ndarray, P: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(Q > 0, Q * np.log(np.maximum(Q, FLOOR) / P), 0.0)
    return float(terms.sum())


def _g(Q: np.ndarray, keep: np.ndarray) -> float:
    return float(dispersion(Q[keep]))


def _g_grad(Q: np.ndarray, keep: np.ndarray) -> np.ndarray:
    rows = np.maximum(Q[keep], FLOOR)
    mix = rows.mean(axis=0)
    grad = np.zeros_like(Q)
    grad[keep] = np.log(rows / mix)
    return grad


def _shrink_to_feasible(Q: np.ndarray, keeps, lam: float) -> np.ndarray:
    """Pull ``Q`` toward its row average until every score is at most ``lam``.

    The scores vanish on equal rows and are convex, so mixing a fraction
    ``s = 1 - lam / max score`` of the average in is enough.
    """
    Q = np.clip(Q, 0.0, None)
    Q = Q / Q.sum(axis=1, keepdims=True)
    worst = max(_g(Q, k) for k in keeps)
    if worst <= lam:
        return Q
    s = 1.0 - lam / worst * (1 - 1e-12)
    avg = Q.mean(axis=0)
    return (1 - s) * Q + s * avg


def _starts(P: np.ndarray, keeps, lam: float, rng: np.random.Generator):
    yield P
    yield _shrink_to_feasible(P, keeps, lam)
    yield np.tile(P.mean(axis=0), (P.shape[0], 1))
    for _ in range(N_RANDOM_STARTS):
        yield rng.dirichlet(np.ones(P.shape[1]), size=P.shape[0])


def ld_inner(problem: LdProblem, rng: np.random.Generator | None = None, maxiter: int = 500) -> LdSolution:
    """Minimum KL cost subject to both ``C`` and ``D`` scoring at most ``lambda``."""
    scenario, lam = problem.scenario, problem.lam
    P = truth_masses(problem.B, scenario)
    M, k = P.shape
    keeps = [np.asarray(complement(S)) - 1 for S in (problem.C, problem.D)]
    pair = (problem.C, problem.D)
    alphabet = scenario.P_N.alphabet

    def package(Q, converged=True):
        Q = _shrink_to_feasible(Q, keeps, lam)
        feasible = max(_g(Q, kp) for kp in keeps) <= lam + CONSTRAINT_TOL
        minimizer = [Distribution(row, alphabet) for row in Q]
        return LdSolution(_kl_cost(Q, P), minimizer, pair, feasible, converged)

    if max(_g(P, kp) for kp in keeps) <= lam:
        return package(P)

    def objective(z):
        Q = z.reshape(M, k)
        return _kl_cost(Q, P), (np.log(np.maximum(Q, FLOOR) / P) + 1.0).ravel()

    constraints = [
        {"type": "ineq", "fun": lambda z, kp=kp: lam - _g(z.reshape(M, k), kp),
         "jac": lambda z, kp=kp: -_g_grad(z.reshape(M, k), kp).ravel()}
        for kp in keeps
    ]
    row_sum = np.kron(np.eye(M), np.ones(k))
    constraints.append({"type": "eq", "fun": lambda z: row_sum @ z - 1.0, "jac": lambda z: row_sum})
    bounds = [(0.0, 1.0)] * (M * k)

    rng = rng if rng is not None else np.random.default_rng(0)
    best = None
    best_raw = np.inf
    any_converged = False
    for Q0 in _starts(P, keeps, lam, rng):
        res = minimize(objective, Q0.ravel(), jac=True, method="SLSQP", bounds=bounds,
                       constraints=constraints, options={"maxiter": maxiter, "ftol": 1e-14})
        any_converged |= bool(res.success)
        best_raw = min(best_raw, float(res.fun))
        candidate = package(res.x.reshape(M, k), bool(res.success))
        if best is None or (candidate.feasible, -candidate.value) > (best.feasible, -best.value):
            best = candidate
    if not any_converged:
        raise SolverNonConvergence(
            f"no start converged for pair {pair}", best=best, gap=best.value - best_raw
        )
    return best


def candidate_pairs(scenario: Scenario):
    """Unordered pairs of distinct candidate sets; the constraints are symmetric in the pair."""
    return itertools.combinations(scenario.space.sets, 2)


def ld_exponent(B: OutlierSet, scenario: Scenario, lam: float, rng: np.random.Generator | None = None) -> LdSolution:
    """False-reject exponent: minimum of :func:`ld_inner` over all pairs."""
    rng = rng if rng is not None else np.random.default_rng(0)
    best = None
    for C, D in candidate_pairs(scenario):
        sol = ld_inner(LdProblem(scenario, B, lam, C, D), rng)
        if best is None or sol.value < best.value:
            best = sol
        if best.value == 0.0:
            break
    return best


def ld_max_upper_bound(B: OutlierSet, scenario: Scenario) -> float:
    """``min_Q sum_i D(Q || law_i)`` over the ``M`` true laws.

    The minimizer is the normalized geometric mean of the laws, so the value
    is ``-M log sum_x prod_i law_i(x)^(1/M)``.
    """
    P = truth_masses(B, scenario)
    log_geo = np.log(P).mean(axis=0)
    return float(max(-P.shape[0] * np.log(np.exp(log_geo).sum()), 0.0))
