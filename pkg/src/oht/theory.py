"""Closed-form performance quantities of the threshold test.

Everything here is evaluated under a :class:`Scenario`: the nominal law, the
anomalous laws, and a true outlier set ``B``. Rival sets ``C`` are the other
members of the hypothesis space, in canonical order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .distributions import AlphabetMismatch, Distribution, DistributionError, kl_array
from .hypotheses import (
    HypothesisSpace,
    OutlierSet,
    complement,
    enumerate_space,
    ordered_rank,
    rivals,
)

PSD_TOL = 1e-9
MIN_VALUE_RTOL = 1e-9
DEFAULT_ORTHANT_SAMPLES = 200_000
DEFAULT_ORTHANT_SEED = 0
NEGLIGIBLE_TAIL = 1e-17


class NotPSD(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class NonPositiveMass(ValueError):
    pass


class NonPositiveThreshold(ValueError):
    pass


class DegenerateVariance(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class Scenario:
    """Nominal law ``P_N`` and anomalous laws ``P_{A,1..T}`` for ``M`` sequences.

    All laws must be strictly positive on one alphabet. An anomalous law equal
    to ``P_N`` is allowed (it yields zero exponents) but triggers a warning.
    """

    M: int
    P_N: Distribution
    anomalies: tuple
    space: HypothesisSpace = field(init=False, repr=False)

    def __post_init__(self):
        space = enumerate_space(self.M)
        anomalies = tuple(self.anomalies)
        if len(anomalies) != space.T:
            raise DistributionError(f"M={self.M} needs T={space.T} anomalous laws, got {len(anomalies)}")
        for P in anomalies:
            if P.alphabet != self.P_N.alphabet:
                raise AlphabetMismatch("scenario laws live on different alphabets")
        for P in (self.P_N, *anomalies):
            if not P.strictly_positive:
                raise DistributionError(f"scenario laws must be strictly positive, got {P!r}")
        if any(P == self.P_N for P in anomalies):
            warnings.warn("an anomalous law equals the nominal law", stacklevel=2)
        object.__setattr__(self, "anomalies", anomalies)
        object.__setattr__(self, "space", space)

    @classmethod
    def all_same(cls, M: int, P_N: Distribution, P_A: Distribution) -> "Scenario":
        """Every outlier drawn from the same anomalous law ``P_A``."""
        return cls(M, P_N, (P_A,) * enumerate_space(M).T)

    @property
    def alphabet_size(self) -> int:
        return self.P_N.alphabet.size

    def set(self, members) -> OutlierSet:
        return OutlierSet(members, self.M)


def truth_masses(B: OutlierSet | None, scenario: Scenario) -> np.ndarray:
    """``(M, k)`` array whose row ``i-1`` is the law of sequence ``i`` under ``H_B``.

    ``B=None`` is the null hypothesis (every row nominal).
    """
    rows = np.tile(scenario.P_N.mass, (scenario.M, 1))
    if B is not None:
        for i in B:
            rows[i - 1] = scenario.anomalies[ordered_rank(B, i) - 1].mass
    return rows


def _mix_mass(B: OutlierSet, C: OutlierSet, scenario: Scenario) -> np.ndarray:
    rows = truth_masses(B, scenario)[np.asarray(complement(C)) - 1]
    if np.all(rows == rows[0]):
        return rows[0].copy()  # exact, so equal laws give densities and GD of exactly 0
    return rows.sum(axis=0) / rows.shape[0]


def p_mix(B: OutlierSet, C: OutlierSet, scenario: Scenario) -> Distribution:
    """Average law of the sequences outside ``C`` when ``B`` are the outliers."""
    return Distribution(_mix_mass(B, C, scenario), scenario.P_N.alphabet)


def gd(B: OutlierSet, C: OutlierSet, scenario: Scenario) -> float:
    """Limit of the score of ``C`` under ``H_B``.

    Zero for ``C = B`` and for any strict superset of ``B``, since only nominal
    sequences remain outside ``C``.
    """
    mix = _mix_mass(B, C, scenario)
    rows = truth_masses(B, scenario)
    return sum(kl_array(rows[i - 1], mix) for i in complement(C))


def _symbol_index(x, scenario: Scenario):
    if isinstance(x, (int, np.integer)) or (isinstance(x, np.ndarray) and np.issubdtype(x.dtype, np.integer)):
        return x
    return scenario.P_N.alphabet.index(x)


def info_density_anomalous(l: int, x, B: OutlierSet, C: OutlierSet, scenario: Scenario):
    """``log P_{A,l}(x) / P_mix(x)``; ``x`` is a symbol or an array of symbol indices."""
    if not 1 <= l <= len(B):
        raise ValueError(f"anomaly index {l} outside [1, {len(B)}]")
    x = _symbol_index(x, scenario)
    P = scenario.anomalies[l - 1].mass
    if np.any(P[x] <= 0):
        raise NonPositiveMass("anomalous law has zero mass at x")
    return np.log(P[x] / _mix_mass(B, C, scenario)[x])


def info_density_nominal(x, B: OutlierSet, C: OutlierSet, scenario: Scenario):
    """``log P_N(x) / P_mix(x)``."""
    x = _symbol_index(x, scenario)
    P = scenario.P_N.mass
    if np.any(P[x] <= 0):
        raise NonPositiveMass("nominal law has zero mass at x")
    return np.log(P[x] / _mix_mass(B, C, scenario)[x])


def density_table(B: OutlierSet, C: OutlierSet, scenario: Scenario) -> np.ndarray:
    """``(M, k)`` table of per-sequence information densities for rival ``C``.

    Row ``j-1`` holds ``x -> log(law_j(x) / P_mix(x))`` for ``j`` outside ``C``
    and zeros for ``j`` in ``C``, so that summing row ``j`` at ``x_j`` over all
    ``j`` gives the density sum of the score of ``C``.
    """
    rows = truth_masses(B, scenario)
    mix = _mix_mass(B, C, scenario)
    table = np.zeros_like(rows)
    keep = np.asarray(complement(C)) - 1
    table[keep] = np.log(rows[keep] / mix)
    return table


def variance_sum(B: OutlierSet, C: OutlierSet, scenario: Scenario) -> float:
    """Sum over sequences outside ``C`` of the variance of their information density."""
    rows = truth_masses(B, scenario)
    f = density_table(B, C, scenario)
    mean = np.sum(rows * f, axis=1)
    var = np.sum(rows * f**2, axis=1) - mean**2
    return float(np.sum(np.maximum(var, 0.0)))


def covariance_matrix(B: OutlierSet, scenario: Scenario) -> np.ndarray:
    """Covariance of the centered density sums of all rivals of ``B``.

    Entry ``(i, k)`` is ``sum_j Cov_{law_j}(f_{C_i, j}(X), f_{C_k, j}(X))``
    with rivals ordered as in :func:`rivals`. The diagonal coincides with
    :func:`variance_sum`.
    """
    rows = truth_masses(B, scenario)
    tables = np.stack([density_table(B, C, scenario) for C in rivals(B, scenario.space)])
    means = np.einsum("jx,cjx->cj", rows, tables)
    second = np.einsum("jx,cjx,djx->cd", rows, tables, tables)
    V = second - means @ means.T
    return (V + V.T) / 2


# ---------------------------------------------------------------------------
# Gaussian orthant probabilities


@dataclass(frozen=True)
class OrthantResult:
    prob: float
    stderr: float
    method: str


def _check_psd(sigma: np.ndarray) -> np.ndarray:
    w, U = np.linalg.eigh(sigma)
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    if w.size and w.min() < -PSD_TOL * scale:
        raise NotPSD(f"covariance has eigenvalue {w.min():.3e}")
    return w, U


def _q1(x: float, var: float) -> float:
    return 0.5 * special.erfc(x / math.sqrt(2.0 * var))


def _q2(x: np.ndarray, sigma: np.ndarray) -> float:
    s1, s2 = math.sqrt(sigma[0, 0]), math.sqrt(sigma[1, 1])
    a1, a2 = x[0] / s1, x[1] / s2
    rho = float(np.clip(sigma[0, 1] / (s1 * s2), -1.0, 1.0))
    if rho > 1 - 1e-12:
        return _q1(max(a1, a2), 1.0)
    if rho < -1 + 1e-12:
        return max(0.0, _q1(a1, 1.0) - _q1(-a2, 1.0))
    cond_sd = math.sqrt(1.0 - rho * rho)

    def integrand(z):
        return math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) * _q1((a2 - rho * z) / cond_sd, 1.0)

    lo = max(a1, -40.0)
    value, _ = integrate.quad(integrand, lo, np.inf, epsabs=1e-13, epsrel=1e-11, limit=200)
    return float(min(max(value, 0.0), 1.0))


def _gaussian_sampler(sigma: np.ndarray) -> np.ndarray:
    """Symmetric square root of ``sigma``.

    Unlike a bare eigenvector basis it is unique and continuous in ``sigma``,
    so covariances equal up to rounding give (nearly) identical samples even
    when eigenvalues repeat.
    """
    w, U = _check_psd(sigma)
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.T


def orthant_estimate(
    x: Sequence[float],
    sigma,
    rng: np.random.Generator | None = None,
    samples: int = DEFAULT_ORTHANT_SAMPLES,
) -> OrthantResult:
    """``P[Z_i > x_i for all i]`` for ``Z ~ N(0, sigma)``.

    One dimension uses ``erfc``, two use adaptive quadrature over the
    conditional tail, three or more use Monte Carlo (``stderr`` is then
    non-zero). Coordinates with zero variance are deterministic zeros and are
    factored out first. ``rng`` defaults to a fixed seed.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    if sigma.shape != (x.size, x.size):
        raise DimensionMismatch(f"point has {x.size} coordinates, covariance is {sigma.shape}")
    sigma = (sigma + sigma.T) / 2
    _check_psd(sigma)
    if np.any(x == np.inf):
        return OrthantResult(0.0, 0.0, "exact")

    diag = np.diag(sigma)
    scale = max(1.0, float(diag.max())) if diag.size else 1.0
    degenerate = diag <= PSD_TOL * scale
    if np.any(degenerate & ~(x < 0)):
        return OrthantResult(0.0, 0.0, "exact")
    # a coordinate missing its tail with probability below double precision
    # cannot move the result, so it is treated as always satisfied
    sd = np.sqrt(np.where(degenerate, 1.0, diag))
    keep = ~degenerate & (special.ndtr(x / sd) > NEGLIGIBLE_TAIL)
    x, sigma = x[keep], sigma[np.ix_(keep, keep)]

    k = x.size
    if k == 0:
        return OrthantResult(1.0, 0.0, "exact")
    if k == 1:
        return OrthantResult(float(_q1(x[0], sigma[0, 0])), 0.0, "erfc")
    if k == 2:
        return OrthantResult(_q2(x, sigma), 0.0, "quadrature")

    if rng is None:
        rng = np.random.default_rng(DEFAULT_ORTHANT_SEED)
    A = _gaussian_sampler(sigma)
    hits = 0
    chunk = 50_000
    for start in range(0, samples, chunk):
        m = min(chunk, samples - start)
        Z = rng.standard_normal((m, k)) @ A.T
        hits += int(np.count_nonzero(np.all(Z > x, axis=1)))
    p = hits / samples
    return OrthantResult(p, math.sqrt(p * (1 - p) / samples), "monte-carlo")


def orthant_q(x, sigma, rng: np.random.Generator | None = None, samples: int = DEFAULT_ORTHANT_SAMPLES) -> float:
    """Multivariate complementary Gaussian CDF with zero mean; see :func:`orthant_estimate`."""
    return orthant_estimate(x, sigma, rng, samples).prob


# ---------------------------------------------------------------------------
# Bounds and second-order calibration


def space_size(M: int) -> int:
    return len(enumerate_space(M))


def misclassification_bound(n: int, lam: float, M: int, alphabet_size: int) -> float:
    """Upper bound ``exp(-n*lam + |X| log((M-1)n + 1))`` on the misclassification probability.

    May exceed 1 for small ``n``; returned as-is.
    """
    return math.exp(-n * lam + alphabet_size * math.log((M - 1) * n + 1))


def false_alarm_bound(n: int, lam: float, M: int, alphabet_size: int) -> float:
    """The misclassification bound scaled by ``|S|^2``."""
    return space_size(M) ** 2 * misclassification_bound(n, lam, M, alphabet_size)


@dataclass(frozen=True, eq=False)
class TheoryProfile:
    B: OutlierSet
    rivals: tuple
    gd: np.ndarray
    gd_min: float
    d: int
    minimizers: tuple
    V: np.ndarray

    def gd_of(self, C: OutlierSet) -> float:
        return float(self.gd[self.rivals.index(C)])

    @property
    def V_min(self) -> np.ndarray:
        """Covariance restricted to the rivals attaining ``gd_min``."""
        idx = np.asarray(self.minimizers)
        return self.V[np.ix_(idx, idx)]

    def to_dict(self) -> dict:
        return {
            "B": list(self.B.members),
            "rivals": [list(C.members) for C in self.rivals],
            "gd": self.gd.tolist(),
            "gd_min": self.gd_min,
            "d": self.d,
            "V": self.V.tolist(),
        }


def profile(B: OutlierSet, scenario: Scenario) -> TheoryProfile:
    rs = rivals(B, scenario.space)
    values = np.array([gd(B, C, scenario) for C in rs])
    gd_min = float(values.min())
    minimizers = tuple(
        i for i, g in enumerate(values) if math.isclose(g, gd_min, rel_tol=MIN_VALUE_RTOL, abs_tol=1e-15)
    )
    V = covariance_matrix(B, scenario)
    for arr in (values, V):
        arr.setflags(write=False)
    return TheoryProfile(B, rs, values, gd_min, len(minimizers), minimizers, V)


def false_reject_bound(
    B: OutlierSet,
    scenario: Scenario,
    lam: float,
    n: int,
    rng: np.random.Generator | None = None,
    prof: TheoryProfile | None = None,
) -> float:
    """Leading-order false-reject bound ``1 - Q(sqrt(n)(lam - GD); 0; V)``.

    The vanishing correction terms are omitted, so this is the asymptotic
    form of the bound.
    """
    prof = prof or profile(B, scenario)
    arg = math.sqrt(n) * (lam - prof.gd)
    return float(min(max(1.0 - orthant_q(arg, prof.V, rng), 0.0), 1.0))


def _orthant_curve(V: np.ndarray, rng: np.random.Generator | None) -> Callable[[float], float]:
    """``L -> Q(L * 1; 0; V)``; for three or more dimensions one fixed sample is reused."""
    d = V.shape[0]
    if d <= 2:
        return lambda L: orthant_q(np.full(d, L), V)
    if rng is None:
        rng = np.random.default_rng(DEFAULT_ORTHANT_SEED)
    Z = rng.standard_normal((DEFAULT_ORTHANT_SAMPLES, d)) @ _gaussian_sampler(V).T
    lowest = np.sort(Z.min(axis=1))
    N = lowest.size
    return lambda L: (N - np.searchsorted(lowest, L, side="right")) / N


def l_star(
    epsilon: float,
    B: OutlierSet,
    scenario: Scenario,
    rng: np.random.Generator | None = None,
    prof: TheoryProfile | None = None,
    tol: float = 1e-10,
) -> float:
    """Largest ``L`` with ``Q_d(L * 1; 0; V_min) >= 1 - epsilon``, by bisection.

    ``V_min`` is the covariance of the ``d`` rivals attaining the minimum GD.
    A vanishing ``V_min`` gives 0 with a :class:`DegenerateVariance` warning.
    """
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    prof = prof or profile(B, scenario)
    return l_star_from_covariance(epsilon, prof.V_min, rng, tol)


def l_star_from_covariance(epsilon: float, V, rng: np.random.Generator | None = None, tol: float = 1e-10) -> float:
    """Largest ``L`` with ``Q_d(L * 1; 0; V) >= 1 - epsilon`` for an explicit covariance ``V``."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    scale = math.sqrt(float(np.max(np.diag(V))))
    if scale <= 1e-7:
        warnings.warn("minimizing rivals have zero variance; L* set to 0", DegenerateVariance, stacklevel=3)
        return 0.0
    target = 1.0 - epsilon
    Q = _orthant_curve(V, rng)
    lo, hi = -scale, scale
    while Q(lo) < target:
        lo *= 2
    while Q(hi) >= target:
        hi *= 2
    for _ in range(200):
        if hi - lo <= tol * scale:
            break
        mid = 0.5 * (lo + hi)
        if Q(mid) >= target:
            lo = mid
        else:
            hi = mid
    return lo


def lambda_star(
    n: int,
    epsilon: float,
    B: OutlierSet,
    scenario: Scenario,
    rng: np.random.Generator | None = None,
    prof: TheoryProfile | None = None,
) -> float:
    """Threshold ``gd_min + L*/sqrt(n)`` targeting false-reject level ``epsilon``."""
    prof = prof or profile(B, scenario)
    value = prof.gd_min + l_star(epsilon, B, scenario, rng, prof) / math.sqrt(n)
    if value <= 0:
        raise NonPositiveThreshold(f"lambda*={value:.4g} <= 0; n={n} is too small for epsilon={epsilon}")
    return value


# ---------------------------------------------------------------------------
# All outliers drawn from one anomalous law


def _mix_all_same(M: int, t: int, l: int, P_N: np.ndarray, P_A: np.ndarray) -> np.ndarray:
    if np.array_equal(P_N, P_A):
        return P_N.copy()
    return (l * P_A + (M - t - l) * P_N) / (M - t)


def gd_all_same(M: int, t: int, l: int, P_N: Distribution, P_A: Distribution) -> float:
    """GD of a rival of size ``t`` leaving ``l`` true outliers among the remaining sequences."""
    if M - t - l < 0:
        raise ValueError(f"t={t}, l={l} leave a negative nominal count for M={M}")
    mix = _mix_all_same(M, t, l, P_N.mass, P_A.mass)
    return l * kl_array(P_A.mass, mix) + (M - t - l) * kl_array(P_N.mass, mix)


def gd_min_all_same(B: OutlierSet, M: int, P_N: Distribution, P_A: Distribution) -> float:
    """Minimum of :func:`gd_all_same` over ``t in [T]`` and ``l in [|B|]``.

    Matches the minimum over rivals when ``|B| = T``. For smaller ``B`` the
    strict supersets of ``B`` are rivals with GD exactly 0, which this range
    (``l >= 1``) leaves out.
    """
    T = enumerate_space(M).T
    return min(gd_all_same(M, t, l, P_N, P_A) for t in range(1, T + 1) for l in range(1, len(B) + 1))


def nominal_gap_all_same(M: int, t: int, l: int, P_N: Distribution, P_A: Distribution) -> float:
    """``D(P_N || mix)``, the rate at which :func:`gd_all_same` grows with ``M``."""
    return kl_array(P_N.mass, _mix_all_same(M, t, l, P_N.mass, P_A.mass))
