"""Monte Carlo estimates of the test's error probabilities.

Panels are sampled through their types: the counts of a length-``n`` i.i.d.
sequence are multinomial, and the test only ever looks at counts. Trials are
split into fixed-size blocks, each seeded from ``(seed, n, block)``, so
results do not depend on how many workers run the blocks.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from . import theory
from .detector import decide_index, scores_from_counts
from .hypotheses import OutlierSet
from .theory import Scenario, truth_masses

BLOCK_SIZE = 2_000
DEFAULT_TRIALS = 10_000

CSV_COLUMNS = (
    "hypothesis", "n", "lambda",
    "miscls", "miscls_lo", "miscls_hi",
    "reject", "reject_lo", "reject_hi",
    "falarm", "falarm_lo", "falarm_hi",
    "bound_miscls", "bound_falarm", "bound_reject",
)


class InsufficientData(ValueError):
    """Too few non-zero estimates to fit a slope."""

    def __init__(self, message, resolvable_exponent=None):
        super().__init__(message)
        self.resolvable_exponent = resolvable_exponent


def worker_count() -> int:
    cap = os.environ.get("OHT_THREADS")
    if cap:
        return max(1, int(cap))
    return min(4, os.cpu_count() or 1)


@dataclass(frozen=True, eq=False)
class ExperimentSpec:
    """One simulation: a scenario, the true hypothesis (``None`` = no outliers) and a threshold.

    ``lam`` is either a positive number or ``"auto:<epsilon>"``, which uses the
    calibrated threshold for each ``n`` (this needs a true outlier set).
    """

    scenario: Scenario
    truth: OutlierSet | None
    n_grid: tuple
    lam: float | str
    trials: int = DEFAULT_TRIALS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.n_grid or min(self.n_grid) < 1:
            raise ValueError("every sequence length must be >= 1")
        if self.truth is not None and self.truth not in self.scenario.space:
            raise ValueError(f"{self.truth!r} is not a hypothesis for M={self.scenario.M}")
        if isinstance(self.lam, str):
            if not self.lam.startswith("auto:"):
                raise ValueError(f"lambda must be a number or 'auto:<epsilon>', got {self.lam!r}")
            if self.truth is None:
                raise ValueError("'auto' thresholds need a true outlier set")
            float(self.lam[5:])
        elif not self.lam > 0:
            raise ValueError(f"threshold must be positive, got {self.lam}")

    @property
    def hypothesis(self) -> str:
        return "null" if self.truth is None else "H" + repr(self.truth)


@dataclass(frozen=True)
class TrialRow:
    hypothesis: str
    n: int
    lam: float
    trials: int
    correct: int
    miscls: int
    reject: int
    falarm: int
    bound_miscls: float
    bound_falarm: float
    bound_reject: float

    def rate(self, which: str) -> float:
        if not self._applies(which):
            return math.nan
        return getattr(self, which) / self.trials

    def interval(self, which: str) -> tuple:
        if not self._applies(which):
            return (math.nan, math.nan)
        return wilson_interval(getattr(self, which), self.trials)

    def _applies(self, which: str) -> bool:
        if which == "falarm":
            return self.hypothesis == "null"
        return self.hypothesis != "null"

    def half_width(self, which: str) -> float:
        lo, hi = self.interval(which)
        return (hi - lo) / 2

    def csv_fields(self) -> list:
        out = [self.hypothesis, self.n, self.lam]
        for which in ("miscls", "reject", "falarm"):
            out += [self.rate(which), *self.interval(which)]
        out += [self.bound_miscls, self.bound_falarm, self.bound_reject]
        return [repr(v) if isinstance(v, float) else v for v in out]


@dataclass(frozen=True, eq=False)
class TrialReport:
    spec: ExperimentSpec
    rows: tuple = field(default_factory=tuple)

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            writer.writerow(row.csv_fields())
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def read_report_csv(text: str) -> list:
    """Parse CSV written by :meth:`TrialReport.to_csv` into dicts of floats."""
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        rows.append({k: (v if k == "hypothesis" else float(v)) for k, v in rec.items()})
    return rows


def wilson_interval(k: int, trials: int, confidence: float = 0.95) -> tuple:
    ci = stats.binomtest(int(k), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return (float(ci.low), float(ci.high))


def block_rng(seed: int, n: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(n, block))))


def sample_counts(masses: np.ndarray, n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Types of ``size`` independent panels: array of shape ``(size, M, k)``."""
    return np.stack([rng.multinomial(n, p, size=size) for p in masses], axis=1)


def sample_panel(spec: ExperimentSpec, n: int, rng: np.random.Generator) -> list:
    """Draw ``M`` raw sequences of symbol indices under the experiment's true hypothesis."""
    masses = truth_masses(spec.truth, spec.scenario)
    k = masses.shape[1]
    return [rng.choice(k, size=n, p=p) for p in masses]


def _resolve_lambdas(spec: ExperimentSpec) -> dict:
    if not isinstance(spec.lam, str):
        return {n: float(spec.lam) for n in spec.n_grid}
    eps = float(spec.lam[5:])
    prof = theory.profile(spec.truth, spec.scenario)
    L = theory.l_star(eps, spec.truth, spec.scenario, prof=prof)
    out = {}
    for n in spec.n_grid:
        value = prof.gd_min + L / math.sqrt(n)
        if value <= 0:
            raise theory.NonPositiveThreshold(f"lambda*={value:.4g} <= 0 at n={n}")
        out[n] = value
    return out


def _run_block(masses, space, n, lam, size, rng) -> np.ndarray:
    counts = sample_counts(masses, n, size, rng)
    return decide_index(scores_from_counts(counts, space), lam)


def simulate_decisions(spec: ExperimentSpec, n: int, lam: float, workers: int | None = None) -> np.ndarray:
    """Decision index of every trial at length ``n`` (-1 = reject), in trial order."""
    masses = truth_masses(spec.truth, spec.scenario)
    space = spec.scenario.space
    sizes = [min(BLOCK_SIZE, spec.trials - s) for s in range(0, spec.trials, BLOCK_SIZE)]

    def job(b):
        return _run_block(masses, space, n, lam, sizes[b], block_rng(spec.seed, n, b))

    workers = workers or worker_count()
    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(b) for b in range(len(sizes))]
    return np.concatenate(parts)


def estimate(spec: ExperimentSpec, workers: int | None = None) -> TrialReport:
    """Estimate misclassification, false-reject and false-alarm rates for each ``n``."""
    scenario = spec.scenario
    lambdas = _resolve_lambdas(spec)
    truth_index = -1 if spec.truth is None else scenario.space.index(spec.truth)
    prof = theory.profile(spec.truth, scenario) if spec.truth is not None else None
    rows = []
    for n in spec.n_grid:
        lam = lambdas[n]
        decisions = simulate_decisions(spec, n, lam, workers)
        rejects = int(np.count_nonzero(decisions < 0))
        beta = theory.misclassification_bound(n, lam, scenario.M, scenario.alphabet_size)
        if spec.truth is None:
            rows.append(TrialRow(spec.hypothesis, n, lam, spec.trials, rejects, 0, rejects,
                                 spec.trials - rejects, math.nan,
                                 theory.false_alarm_bound(n, lam, scenario.M, scenario.alphabet_size),
                                 math.nan))
        else:
            correct = int(np.count_nonzero(decisions == truth_index))
            rows.append(TrialRow(spec.hypothesis, n, lam, spec.trials, correct,
                                 spec.trials - correct - rejects, rejects, 0, beta, math.nan,
                                 theory.false_reject_bound(spec.truth, scenario, lam, n, prof=prof)))
    return TrialReport(spec, tuple(rows))


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    stderr: float
    intercept: float
    n_used: tuple
    dropped: tuple


def exponent_fit(report: TrialReport, which: str = "reject") -> ExponentFit:
    """Least-squares slope of ``-log(rate)`` against ``n``.

    Zero-count points are dropped (listed in ``dropped``), never imputed.
    """
    ns, ys, dropped = [], [], []
    for row in report.rows:
        rate = row.rate(which)
        if not rate > 0:
            dropped.append(row.n)
            continue
        ns.append(row.n)
        ys.append(-math.log(rate))
    if len(ns) < 3:
        n_max = max(row.n for row in report.rows)
        trials = report.spec.trials
        raise InsufficientData(
            f"only {len(ns)} lengths with non-zero {which} counts",
            resolvable_exponent=math.log(trials) / n_max,
        )
    fit = stats.linregress(ns, ys)
    return ExponentFit(float(fit.slope), float(fit.stderr), float(fit.intercept), tuple(ns), tuple(dropped))


def planted_report(n_grid: Sequence[int], rates: Sequence[float], trials: int = 10**9) -> TrialReport:
    """A report with prescribed false-reject rates, for checking :func:`exponent_fit`."""
    rows = tuple(
        TrialRow("planted", int(n), 1.0, trials, 0, 0, int(round(r * trials)), 0,
                 math.nan, math.nan, math.nan)
        for n, r in zip(n_grid, rates)
    )
    spec = _PlantedSpec(trials)
    return TrialReport(spec, rows)


@dataclass(frozen=True)
class _PlantedSpec:
    trials: int
