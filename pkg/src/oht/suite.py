"""End-to-end checks reproducing the test's claimed behavior at desk scale.

Each ``check_*`` function returns a :class:`CheckResult` carrying the rows it
computed; :func:`paper_suite` runs them all and writes one CSV per check plus
a summary. ``quick=True`` shrinks every budget (results are marked "smoke").
Oracles used here (grid search, Sheppard's formula, sampled covariances,
binary-entropy scores) are computed independently of the code they check.
"""

from __future__ import annotations

import csv
import filecmp
import io
import itertools
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import detector, large_deviations, montecarlo, theory
from .distributions import Distribution, bernoulli
from .hypotheses import complement, ordered_rank

DEFAULT_SEED = 20240101


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    rows: list = field(default_factory=list)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}: {self.detail}"


def _rows_to_csv(rows: list) -> str:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def random_scenario(rng: np.random.Generator, M: int, k: int) -> theory.Scenario:
    T = theory.enumerate_space(M).T

    def draw():
        return Distribution(rng.dirichlet(np.ones(k)) * (1 - 1e-3 * k) + 1e-3)

    return theory.Scenario(M, draw(), tuple(draw() for _ in range(T)))


def reference_scenario() -> theory.Scenario:
    """M=4, nominal Bernoulli(0.2), anomalous Bernoulli(0.8)."""
    return theory.Scenario.all_same(4, bernoulli(0.2), bernoulli(0.8))


# ---------------------------------------------------------------------------


def check_gd_identity(quick=False, seed=DEFAULT_SEED) -> CheckResult:
    """GD(B, C) equals the score of C on the noiseless panel of H_B."""
    rng = np.random.default_rng([seed, 1])
    n_scen = 20 if quick else 200
    worst, rows = 0.0, []
    for s in range(n_scen):
        M, k = int(rng.choice([3, 4, 5])), int(rng.choice([2, 3, 4]))
        sc = random_scenario(rng, M, k)
        local = 0.0
        for B in sc.space:
            panel = theory.truth_masses(B, sc)
            for C in sc.space:
                a = theory.gd(B, C, sc)
                b = detector.g_score(C, list(panel))
                local = max(local, abs(a - b))
        worst = max(worst, local)
        rows.append({"scenario": s, "M": M, "k": k, "max_abs_diff": local})
    ok = worst <= 1e-12
    return CheckResult(1, "gd_equals_score_on_truth", ok, f"max |GD - G| = {worst:.3e} over {n_scen} scenarios (tol 1e-12)", rows)


def gd_by_expectation(B, C, sc) -> float:
    """Expected information densities, summed over the sequences outside ``C``."""
    k = sc.alphabet_size
    xs = np.arange(k)
    total = 0.0
    for i in complement(C):
        if i in B:
            l = ordered_rank(B, i)
            P = sc.anomalies[l - 1].mass
            total += float(np.sum(P * theory.info_density_anomalous(l, xs, B, C, sc)))
        else:
            total += float(np.sum(sc.P_N.mass * theory.info_density_nominal(xs, B, C, sc)))
    return total


def check_gd_expectation(quick=False, seed=DEFAULT_SEED) -> CheckResult:
    rng = np.random.default_rng([seed, 1])
    n_scen = 20 if quick else 200
    worst, rows = 0.0, []
    for s in range(n_scen):
        M, k = int(rng.choice([3, 4, 5])), int(rng.choice([2, 3, 4]))
        sc = random_scenario(rng, M, k)
        local = 0.0
        for B in sc.space:
            for C in sc.space:
                if C == B:
                    continue
                local = max(local, abs(theory.gd(B, C, sc) - gd_by_expectation(B, C, sc)))
        worst = max(worst, local)
        rows.append({"scenario": s, "M": M, "k": k, "max_abs_diff": local})
    ok = worst <= 1e-12
    return CheckResult(2, "gd_equals_expected_densities", ok, f"max diff = {worst:.3e} (tol 1e-12)", rows)


def check_orthant(quick=False, seed=DEFAULT_SEED) -> CheckResult:
    rows = []
    q1 = theory.orthant_q([0.0], [[1.0]])
    rows.append({"case": "k1_origin", "value": q1, "oracle": 0.5, "tol": 0.0})
    ok = q1 == 0.5

    rho = 0.5
    q2 = theory.orthant_q([0.0, 0.0], [[1.0, rho], [rho, 1.0]])
    sheppard = 0.25 + math.asin(rho) / (2 * math.pi)
    rows.append({"case": "k2_sheppard", "value": q2, "oracle": sheppard, "tol": 2e-3})
    ok &= abs(q2 - sheppard) <= 2e-3

    rng = np.random.default_rng([seed, 3])
    for k in (3, 4):
        var = rng.uniform(0.5, 2.0, size=k)
        x = rng.uniform(-1.0, 0.5, size=k)
        res = theory.orthant_estimate(x, np.diag(var), rng=np.random.default_rng([seed, 30 + k]),
                                      samples=50_000 if quick else theory.DEFAULT_ORTHANT_SAMPLES)
        product = float(np.prod(stats.norm.sf(x / np.sqrt(var))))
        tol = 3 * res.stderr
        rows.append({"case": f"k{k}_diagonal", "value": res.prob, "oracle": product, "tol": tol})
        ok &= abs(res.prob - product) <= tol
    detail = "; ".join(f"{r['case']}: {r['value']:.5f} vs {r['oracle']:.5f}" for r in rows)
    return CheckResult(3, "orthant_probabilities", bool(ok), detail, rows)


def sampled_density_sums(B, sc, draws: int, rng) -> np.ndarray:
    """Draw ``X_1..X_M`` under ``H_B`` and evaluate each rival's density sum."""
    k = sc.alphabet_size
    masses = theory.truth_masses(B, sc)
    X = np.stack([rng.choice(k, size=draws, p=p) for p in masses], axis=1)
    sums = []
    for C in theory.rivals(B, sc.space):
        total = np.zeros(draws)
        for i in complement(C):
            if i in B:
                total += theory.info_density_anomalous(ordered_rank(B, i), X[:, i - 1], B, C, sc)
            else:
                total += theory.info_density_nominal(X[:, i - 1], B, C, sc)
        sums.append(total)
    return np.stack(sums, axis=1)


def check_covariance(quick=False, seed=DEFAULT_SEED) -> CheckResult:
    rng = np.random.default_rng([seed, 4])
    draws = 100_000 if quick else 1_000_000
    rows, ok = [], True
    for s in range(5):
        sc = random_scenario(rng, 4, 2)
        B = sc.set([int(rng.integers(1, 5))])
        V = theory.covariance_matrix(B, sc)
        Y = sampled_density_sums(B, sc, draws, rng)
        Yc = Y - Y.mean(axis=0)
        for i, j in itertools.combinations(range(Y.shape[1]), 2):
            prod = Yc[:, i] * Yc[:, j]
            est = float(prod.mean())
            se = float(prod.std(ddof=1) / math.sqrt(draws))
            passed = abs(V[i, j] - est) <= 3 * se + 1e-12
            ok &= passed
            rows.append({"scenario": s, "B": repr(B), "i": i, "j": j, "analytic": float(V[i, j]),
                         "sampled": est, "stderr": se, "z": (V[i, j] - est) / se if se else 0.0})
    worst = max(abs(r["z"]) for r in rows)
    return CheckResult(4, "covariance_vs_sampling", bool(ok), f"max |z| = {worst:.2f} over {len(rows)} entries (tol 3)", rows)


def _binary_entropy(p):
    with np.errstate(divide="ignore", invalid="ignore"):
        return -(np.where(p > 0, p * np.log(p), 0.0) + np.where(p < 1, (1 - p) * np.log1p(-p), 0.0))


def _binary_kl(q, p):
    return -_binary_entropy(q) - q * math.log(p) - (1 - q) * math.log(1 - p)


def grid_ld(sc, B, lam: float, step: float = 0.02) -> float:
    """Brute-force exponent on a grid of ``P(symbol 1)`` values, binary alphabet only."""
    M = sc.M
    grid = np.round(np.arange(0, 1 + step / 2, step), 12)
    truth = theory.truth_masses(B, sc)[:, 1]
    best = np.inf
    for head in itertools.product(grid, repeat=M - 2):
        q = np.empty((grid.size, grid.size, M))
        q[..., : M - 2] = head
        q[..., M - 2] = grid[:, None]
        q[..., M - 1] = grid[None, :]
        cost = sum(_binary_kl(q[..., i], truth[i]) for i in range(M))
        h = _binary_entropy(q)
        low = np.zeros(cost.shape, dtype=int)
        for C in sc.space:
            keep = np.asarray(complement(C)) - 1
            mix = q[..., keep].mean(axis=-1)
            score = len(keep) * _binary_entropy(mix) - h[..., keep].sum(axis=-1)
            low += score <= lam
        feasible = low >= 2
        if np.any(feasible):
            best = min(best, float(cost[feasible].min()))
    return best


def check_ld_grid(quick=False, seed=DEFAULT_SEED) -> CheckResult:
    sc = reference_scenario()
    B = sc.set([1])
    g = theory.profile(B, sc).gd_min
    rows, ok = [], True
    for c in ((0.5,) if quick else (0.25, 0.5, 0.75)):
        lam = c * g
        solver = large_deviations.ld_exponent(B, sc, lam).value
        oracle = grid_ld(sc, B, lam)
        passed = abs(solver - oracle) <= 0.03
        ok &= passed
        rows.append({"fraction": c, "lambda": lam, "solver": solver, "grid": oracle, "passed": passed})
    above = large_deviations.ld_exponent(B, sc, 1.1 * g).value
    below = large_deviations.ld_exponent(B, sc, 0.9 * g).value
    rows.append({"fraction": 1.1, "lambda": 1.1 * g, "solver": above, "grid": math.nan, "passed": above <= 1e-4})
    rows.append({"fraction": 0.9, "lambda": 0.9 * g, "solver": below, "grid": math.nan, "passed": below > 1e-3})
    ok &= above <= 1e-4 and below > 1e-3
    detail = "; ".join(f"{r['fraction']}*GD: {r['solver']:.4f}" + (f" vs grid {r['grid']:.4f}" if not math.isnan(r["grid"]) else "")
                       for r in rows)
    return CheckResult(5, "ld_vs_grid", bool(ok), detail, rows)


def check_hand_detection(quick=False, seed=DEFAULT_SEED) -> CheckResult:
    panel = ["aaaa", "bbbb", "bbbb", "bbbb"]
    v1 = detector.run_test(panel, 1.0)
    v2 = detector.run_test(panel, 2.5)
    ok = v1.to_dict() == {"verdict": "outliers", "set": [1]} and v2.to_dict() == {"verdict": "reject"}
    rows = [{"lambda": 1.0, "verdict": v1.to_json()}, {"lambda": 2.5, "verdict": v2.to_json()}]
    return CheckResult(6, "hand_computed_detection", ok, f"lambda=1 -> {v1.to_json()}, lambda=2.5 -> {v2.to_json()}", rows)


def _report_rows(report: montecarlo.TrialReport) -> list:
    return [dict(zip(montecarlo.CSV_COLUMNS, r.csv_fields())) for r in report.rows]


def check_phase_transition(quick=False, seed=DEFAULT_SEED) -> CheckResult:
    sc = reference_scenario()
    B = sc.set([1])
    g = theory.profile(B, sc).gd_min
    trials = 2_000 if quick else 10_000
    n_grid = (100, 300, 1000)
    rows, ok, notes = [], True, []
    for c in (0.5, 1.5):
        for truth in (B, None):
            spec = montecarlo.ExperimentSpec(sc, truth, n_grid, c * g, trials, seed)
            report = montecarlo.estimate(spec)
            rows += [{"fraction": c, **r} for r in _report_rows(report)]
            for row in report.rows:
                which, bound = ("miscls", row.bound_miscls) if truth else ("falarm", row.bound_falarm)
                if bound < 1 and row.rate(which) > bound:
                    ok = False
                    notes.append(f"{which} {row.rate(which):.4g} > bound {bound:.3g} at n={row.n}")
            if truth is not None:
                last = report.rows[-1].rate("reject")
                target_ok = last <= 0.05 if c < 1 else last >= 0.95
                ok &= target_ok
                notes.append(f"{c}*GD reject@1000={last:.4f}")
    return CheckResult(7, "phase_transition", bool(ok), "; ".join(notes), rows)


def check_lambda_star(quick=False, seed=DEFAULT_SEED) -> CheckResult:
    sc = reference_scenario()
    B = sc.set([1])
    eps = 0.2
    trials = 2_000 if quick else 10_000
    spec = montecarlo.ExperimentSpec(sc, B, (100, 300, 1000), f"auto:{eps}", trials, seed)
    report = montecarlo.estimate(spec)
    last = report.rows[-1]
    rate, hw = last.rate("reject"), last.half_width("reject")
    ok = rate <= eps + 3 * hw
    return CheckResult(8, "lambda_star_calibration", ok,
                       f"reject@1000={rate:.4f} with lambda*={last.lam:.5f}, limit {eps + 3 * hw:.4f}",
                       _report_rows(report))


def check_exponent(quick=False, seed=DEFAULT_SEED) -> CheckResult:
    sc = reference_scenario()
    B = sc.set([1])
    g = theory.profile(B, sc).gd_min
    lam = 0.5 * g
    trials = 10_000 if quick else 100_000
    spec = montecarlo.ExperimentSpec(sc, B, tuple(range(50, 401, 50)), lam, trials, seed)
    report = montecarlo.estimate(spec)
    predicted = large_deviations.ld_exponent(B, sc, lam).value
    rows = _report_rows(report)
    try:
        fit = montecarlo.exponent_fit(report, "reject")
    except montecarlo.InsufficientData as exc:
        return CheckResult(9, "exponent_consistency", False,
                           f"{exc}; resolvable exponent ~{exc.resolvable_exponent:.4f}", rows)
    ratio = fit.slope / predicted
    ok = 0.5 <= ratio <= 1.5
    detail = (f"slope {fit.slope:.4f} +- {fit.stderr:.4f} over n={list(fit.n_used)} "
              f"vs LD {predicted:.4f} (ratio {ratio:.3f}, band [0.5, 1.5])")
    rows.append({"hypothesis": "fit", "n": "", "lambda": lam, "slope": fit.slope, "stderr": fit.stderr,
                 "ld_prediction": predicted})
    rows = [dict.fromkeys(list(montecarlo.CSV_COLUMNS) + ["slope", "stderr", "ld_prediction"], "") | r for r in rows]
    return CheckResult(9, "exponent_consistency", ok, detail, rows)


STOCHASTIC_CHECKS = (check_orthant, check_covariance, check_phase_transition, check_lambda_star, check_exponent)


def check_determinism(quick=True, seed=DEFAULT_SEED) -> CheckResult:
    """Run the randomized checks twice in quick mode and compare their CSV bytes."""
    rows, ok = [], True
    with tempfile.TemporaryDirectory() as tmp:
        dirs = [Path(tmp) / "a", Path(tmp) / "b"]
        for d in dirs:
            d.mkdir()
            for check in STOCHASTIC_CHECKS:
                res = check(quick=True, seed=seed)
                (d / f"check_{res.number:02d}.csv").write_text(_rows_to_csv(res.rows))
        for f in sorted(p.name for p in dirs[0].iterdir()):
            same = filecmp.cmp(dirs[0] / f, dirs[1] / f, shallow=False)
            ok &= same
            rows.append({"file": f, "identical": same})
    return CheckResult(10, "determinism", bool(ok), f"{sum(r['identical'] for r in rows)}/{len(rows)} CSV files identical", rows)


CHECKS = (
    check_gd_identity,
    check_gd_expectation,
    check_orthant,
    check_covariance,
    check_ld_grid,
    check_hand_detection,
    check_phase_transition,
    check_lambda_star,
    check_exponent,
    check_determinism,
)


def run_check(check, quick=False, seed=DEFAULT_SEED) -> CheckResult:
    start = time.perf_counter()
    res = check(quick=quick, seed=seed)
    res.seconds = time.perf_counter() - start
    return res


def paper_suite(out_dir, quick=False, seed=DEFAULT_SEED, echo=print) -> int:
    """Run every check, write ``check_NN_<name>.csv`` and ``summary.csv``; return an exit status."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mode = "smoke" if quick else "full"
    summary = []
    for check in CHECKS:
        res = run_check(check, quick=quick, seed=seed)
        (out / f"check_{res.number:02d}_{res.name}.csv").write_text(_rows_to_csv(res.rows))
        summary.append({"criterion": res.number, "name": res.name, "status": "pass" if res.passed else "fail",
                        "mode": mode, "detail": res.detail})
        if echo:
            echo(f"{res.line()} ({res.seconds:.1f}s)")
    (out / "summary.csv").write_text(_rows_to_csv(summary))
    failed = [s for s in summary if s["status"] == "fail"]
    if echo:
        echo(f"{len(summary) - len(failed)}/{len(summary)} checks passed ({mode})")
    return 1 if failed else 0
