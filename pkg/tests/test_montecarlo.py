import math
import warnings

import numpy as np
import pytest

from oht import theory
from oht.distributions import Distribution, bernoulli
from oht.hypotheses import OutlierSet
from oht.montecarlo import (
    CSV_COLUMNS,
    ExperimentSpec,
    InsufficientData,
    block_rng,
    estimate,
    exponent_fit,
    planted_report,
    read_report_csv,
    sample_counts,
    sample_panel,
    wilson_interval,
)
from oht.suite import reference_scenario


def ten_sequence_scenario():
    P_N = Distribution([0.6, 0.3, 0.1])
    anomalies = (Distribution([0.1, 0.1, 0.8]), Distribution([0.2, 0.7, 0.1]),
                 Distribution([0.4, 0.4, 0.2]), Distribution([0.05, 0.45, 0.5]))
    return theory.Scenario(10, P_N, anomalies)


class TestSampling:
    def test_panel_laws(self):
        sc = ten_sequence_scenario()
        spec = ExperimentSpec(sc, OutlierSet([2, 3, 6], 10), (1,), 0.1)
        panel = sample_panel(spec, 40_000, np.random.default_rng(0))
        freq = [np.bincount(seq, minlength=3) / seq.size for seq in panel]
        expected = {2: sc.anomalies[0], 3: sc.anomalies[1], 6: sc.anomalies[2]}
        for i in range(1, 11):
            law = expected.get(i, sc.P_N).mass
            assert np.allclose(freq[i - 1], law, atol=0.015)

    def test_null_panel(self):
        sc = ten_sequence_scenario()
        spec = ExperimentSpec(sc, None, (1,), 0.1)
        panel = sample_panel(spec, 40_000, np.random.default_rng(1))
        for seq in panel:
            assert np.allclose(np.bincount(seq, minlength=3) / seq.size, sc.P_N.mass, atol=0.015)

    def test_point_mass_counts(self):
        counts = sample_counts(np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), 7, 5, np.random.default_rng(2))
        assert counts.shape == (5, 3, 2)
        assert np.all(counts[:, :2] == [7, 0]) and np.all(counts[:, 2] == [0, 7])

    def test_counts_sum_to_n(self):
        counts = sample_counts(theory.truth_masses(None, ten_sequence_scenario()), 13, 50, np.random.default_rng(3))
        assert np.all(counts.sum(axis=-1) == 13)

    def test_block_streams_differ(self):
        a, b = block_rng(1, 100, 0).random(4), block_rng(1, 100, 1).random(4)
        assert not np.array_equal(a, b)
        assert np.array_equal(a, block_rng(1, 100, 0).random(4))


class TestSpec:
    def test_validation(self):
        sc = reference_scenario()
        with pytest.raises(ValueError):
            ExperimentSpec(sc, sc.set([1]), (10,), 0.1, trials=0)
        with pytest.raises(ValueError):
            ExperimentSpec(sc, sc.set([1]), (0,), 0.1)
        with pytest.raises(ValueError):
            ExperimentSpec(sc, None, (10,), "auto:0.1")
        with pytest.raises(ValueError):
            ExperimentSpec(sc, sc.set([1]), (10,), -1.0)
        with pytest.raises(ValueError):
            ExperimentSpec(sc, OutlierSet([1, 2], 6), (10,), 0.1)


class TestEstimate:
    def test_nominal_anomaly_always_rejected(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sc = theory.Scenario.all_same(4, bernoulli(0.3), bernoulli(0.3))
        report = estimate(ExperimentSpec(sc, sc.set([2]), (50, 2000), 0.05, trials=2000, seed=1))
        rates = [row.rate("reject") for row in report.rows]
        assert rates[-1] == 1.0 and rates[-1] >= rates[0]

    def test_no_false_alarm_above_score_bound(self):
        sc = ten_sequence_scenario()
        lam = 10 * math.log(10) + 0.01
        report = estimate(ExperimentSpec(sc, None, (5, 40), lam, trials=500, seed=2))
        assert all(row.falarm == 0 for row in report.rows)

    def test_single_trial(self):
        sc = reference_scenario()
        row = estimate(ExperimentSpec(sc, sc.set([1]), (30,), 0.2, trials=1, seed=3)).rows[0]
        assert row.correct + row.miscls + row.reject == 1
        assert {row.rate("miscls"), row.rate("reject")} <= {0.0, 1.0}

    def test_outcomes_sum_to_trials(self):
        sc = theory.Scenario(5, bernoulli(0.3), (bernoulli(0.6), bernoulli(0.8)))
        report = estimate(ExperimentSpec(sc, sc.set([1, 4]), (10, 40, 160), 0.1, trials=3000, seed=4))
        for row in report.rows:
            assert row.correct + row.miscls + row.reject == row.trials
            total = row.rate("miscls") + row.rate("reject") + row.correct / row.trials
            assert total == pytest.approx(1.0, abs=1e-15)
            for which in ("miscls", "reject"):
                lo, hi = row.interval(which)
                assert 0 <= lo <= row.rate(which) <= hi <= 1

    def test_reproducible_and_schedule_independent(self):
        sc = reference_scenario()
        spec = ExperimentSpec(sc, sc.set([1]), (20, 80), 0.3, trials=7000, seed=99)
        one = estimate(spec, workers=1).to_csv()
        four = estimate(spec, workers=4).to_csv()
        assert one == four == estimate(spec).to_csv()
        other = estimate(ExperimentSpec(sc, sc.set([1]), (20, 80), 0.3, trials=7000, seed=100)).to_csv()
        assert other != one

    def test_auto_threshold(self):
        sc = reference_scenario()
        B = sc.set([1])
        report = estimate(ExperimentSpec(sc, B, (400, 1000), "auto:0.2", trials=200, seed=5))
        for row in report.rows:
            assert row.lam == pytest.approx(theory.lambda_star(row.n, 0.2, B, sc), rel=1e-12)

    def test_null_bound_columns(self):
        sc = reference_scenario()
        row = estimate(ExperimentSpec(sc, None, (100,), 0.3, trials=100, seed=6)).rows[0]
        assert math.isnan(row.bound_miscls) and math.isnan(row.rate("reject"))
        assert row.bound_falarm == pytest.approx(theory.false_alarm_bound(100, 0.3, 4, 2))


class TestWilson:
    def test_zero_count(self):
        lo, hi = wilson_interval(0, 100)
        assert lo == 0.0 and 0 < hi < 0.05

    def test_contains_rate(self):
        lo, hi = wilson_interval(30, 100)
        assert lo < 0.3 < hi


class TestExponentFit:
    def test_constant_rates(self):
        fit = exponent_fit(planted_report([50, 100, 150, 200], [0.2] * 4))
        assert fit.slope == pytest.approx(0.0, abs=1e-9)

    def test_planted_exponential(self):
        ns = np.arange(10, 110, 10)
        fit = exponent_fit(planted_report(ns, np.exp(-0.1 * ns)))
        assert fit.slope == pytest.approx(0.1, abs=max(3 * fit.stderr, 1e-6))

    def test_zero_counts_dropped(self):
        fit = exponent_fit(planted_report([10, 20, 30, 40], [0.5, 0.25, 0.125, 0.0], trials=1000))
        assert fit.dropped == (40,) and fit.n_used == (10, 20, 30)

    def test_insufficient(self):
        with pytest.raises(InsufficientData) as info:
            exponent_fit(planted_report([10, 20, 30], [0.1, 0.0, 0.0], trials=1000))
        assert info.value.resolvable_exponent == pytest.approx(math.log(1000) / 30)


class TestCsv:
    def test_round_trip(self):
        sc = reference_scenario()
        report = estimate(ExperimentSpec(sc, sc.set([1]), (40, 120), 0.25, trials=600, seed=7))
        rows = read_report_csv(report.to_csv())
        assert list(rows[0]) == list(CSV_COLUMNS)
        for parsed, row in zip(rows, report.rows):
            assert parsed["n"] == row.n and parsed["lambda"] == row.lam
            assert parsed["reject"] == row.rate("reject")
            assert (parsed["reject_lo"], parsed["reject_hi"]) == row.interval("reject")
            assert math.isnan(parsed["falarm"])
            assert parsed["bound_reject"] == row.bound_reject
