import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oht.detector import (
    LengthMismatch,
    Verdict,
    decide,
    decide_index,
    g_score,
    run_test,
    score_all,
    scores_from_counts,
)
from oht.distributions import Alphabet, Distribution, EmpiricalDistribution, empirical
from oht.hypotheses import OutlierSet, enumerate_space

RIVAL_MIN = math.log(3) + 2 * math.log(1.5)  # mixture (1/3, 2/3) on {a, b}
DELTA_PANEL = ["aaaa", "bbbb", "bbbb", "bbbb"]
AB = Alphabet.from_symbols("ab")


def delta_panel():
    return [empirical(s, AB) for s in DELTA_PANEL]


def count_panels(M, k=3, n=6):
    """Panels of M count vectors over k symbols, each summing to n."""
    row = st.lists(st.integers(0, n), min_size=k - 1, max_size=k - 1).filter(lambda r: sum(r) <= n)
    return st.lists(row.map(lambda r: r + [n - sum(r)]), min_size=M, max_size=M)


class TestGScore:
    def test_identical_distributions_score_zero(self):
        Q = [Distribution([0.2, 0.3, 0.5])] * 5
        for B in enumerate_space(5):
            assert g_score(B, Q) == 0.0

    def test_remaining_equal(self):
        Q = [Distribution([1, 0]), Distribution([0, 1]), Distribution([0, 1]), Distribution([0, 1])]
        assert g_score(OutlierSet([1], 4), Q) == 0.0

    def test_hand_value(self):
        Q = [Distribution([1, 0]), Distribution([0, 1]), Distribution([0, 1]), Distribution([0, 1])]
        assert g_score(OutlierSet([2], 4), Q) == pytest.approx(RIVAL_MIN, abs=1e-14)

    def test_matches_kl_sum(self):
        rng = np.random.default_rng(3)
        Q = [Distribution(rng.dirichlet(np.ones(3))) for _ in range(5)]
        B = OutlierSet([2, 4], 5)
        rest = [Q[i - 1].mass for i in (1, 3, 5)]
        mix = np.mean(rest, axis=0)
        expected = sum(float(np.sum(q * np.log(q / mix))) for q in rest)
        assert g_score(B, Q) == pytest.approx(expected, rel=1e-13)


class TestScoreAll:
    def test_identical_empiricals(self):
        panel = [empirical(s, AB) for s in ["abab", "baba", "abba", "baab"]]
        table = score_all(panel, enumerate_space(4))
        assert np.all(table.scores == 0.0)

    def test_delta_panel(self):
        table = score_all(delta_panel(), enumerate_space(4))
        assert table[OutlierSet([1], 4)] == 0.0
        for i in (2, 3, 4):
            assert table[OutlierSet([i], 4)] == pytest.approx(RIVAL_MIN, abs=1e-14)

    def test_random_m5(self):
        rng = np.random.default_rng(0)
        panel = [EmpiricalDistribution(rng.multinomial(20, [0.3, 0.3, 0.4])) for _ in range(5)]
        table = score_all(panel, enumerate_space(5))
        assert len(table.scores) == 15 and np.all(np.isfinite(table.scores))
        assert set(table.as_dict()) == set(enumerate_space(5).sets)

    def test_length_mismatch(self):
        panel = [empirical("aab", AB), empirical("ab", AB), empirical("aab", AB)]
        with pytest.raises(LengthMismatch):
            score_all(panel, enumerate_space(3))

    @settings(max_examples=200)
    @given(count_panels(5))
    def test_zero_iff_equal_counts(self, rows):
        counts = np.array(rows)
        space = enumerate_space(5)
        scores = scores_from_counts(counts, space)
        for k, C in enumerate(space.sets):
            rest = np.delete(counts, [i - 1 for i in C], axis=0)
            all_equal = bool(np.all(rest == rest[0]))
            assert (scores[k] == 0.0) == all_equal
            assert scores[k] >= 0

    @settings(max_examples=200)
    @given(count_panels(5, k=4, n=9))
    def test_bounded(self, rows):
        space = enumerate_space(5)
        scores = scores_from_counts(np.array(rows), space)
        for k, C in enumerate(space.sets):
            K = 5 - len(C)
            assert scores[k] <= K * math.log(K) + 1e-12

    @settings(max_examples=100)
    @given(count_panels(5), st.permutations(range(5)), st.floats(0.01, 2.0))
    def test_permutation_equivariance(self, rows, perm, lam):
        space = enumerate_space(5)
        counts = np.array(rows)
        permuted = counts[list(perm)]  # sequence i of the permuted panel is sequence perm[i] originally
        s0 = scores_from_counts(counts, space)
        s1 = scores_from_counts(permuted, space)
        inverse = {perm[i] + 1: i + 1 for i in range(5)}
        for k, C in enumerate(space.sets):
            mapped = OutlierSet([inverse[j] for j in C], 5)
            assert s1[space.index(mapped)] == pytest.approx(s0[k], abs=1e-12)
        v0, v1 = int(decide_index(s0, lam)), int(decide_index(s1, lam))
        if v0 < 0:
            assert v1 < 0
        else:
            expected = OutlierSet([inverse[j] for j in space.sets[v0]], 5)
            assert v1 == space.index(expected)


class TestDecide:
    def test_all_zero_rejects(self):
        panel = [empirical(s, AB) for s in ["abab", "baba", "abba", "baab"]]
        assert decide(score_all(panel, enumerate_space(4)), 0.1).is_reject

    def test_delta_panel(self):
        table = score_all(delta_panel(), enumerate_space(4))
        assert decide(table, 1.0) == Verdict.outliers(OutlierSet([1], 4))
        assert decide(table, 2.5).is_reject

    def test_tie_at_threshold_rejects(self):
        table = score_all(delta_panel(), enumerate_space(4))
        assert decide(table, float(table.scores[1])).is_reject

    def test_tied_minimum_rejects(self):
        assert decide_index(np.array([0.0, 0.0, 5.0]), 1.0) == -1

    def test_nonpositive_threshold(self):
        with pytest.raises(ValueError):
            decide(score_all(delta_panel(), enumerate_space(4)), 0.0)

    @settings(max_examples=200)
    @given(arrays(float, 6, elements=st.floats(0, 3)), st.floats(0.01, 3))
    def test_winner_is_unique_strict_minimum(self, scores, lam):
        k = int(decide_index(scores, lam))
        if k >= 0:
            others = np.delete(scores, k)
            assert np.all(scores[k] < others) and np.all(others > lam)
        else:
            order = np.sort(scores)
            assert not (order[0] < order[1] and order[1] > lam)


class TestRunTest:
    def test_delta_panel(self):
        assert run_test(DELTA_PANEL, 1.0).to_dict() == {"verdict": "outliers", "set": [1]}

    def test_identical_empiricals(self):
        assert run_test(["abab", "baba", "abba", "baab"], 0.1).to_dict() == {"verdict": "reject"}

    def test_threshold_above_every_score(self):
        rng = np.random.default_rng(5)
        # every score is at most (M - 1) log(M - 1), which stays below 10 up to M = 6
        for M in range(3, 7):
            seqs = ["".join(rng.choice(list("abc"), size=12)) for _ in range(M)]
            assert run_test(seqs, 10.0).is_reject

    def test_single_symbol_panel(self):
        assert run_test(["aaa", "aaa", "aaa"], 0.5).is_reject

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            run_test(["ab", "abb", "ab"], 0.5)

    def test_integer_sequences(self):
        seqs = [(0, 0, 0, 0), (1, 1, 1, 1), (1, 1, 1, 1), (1, 1, 1, 1)]
        assert run_test(seqs, 1.0).set == OutlierSet([1], 4)

    def test_consistency_as_n_grows(self):
        rng = np.random.default_rng(11)
        P_N, P_A = [0.7, 0.2, 0.1], [0.1, 0.3, 0.6]
        hits = {}
        for n in (20, 400):
            ok = 0
            for _ in range(200):
                seqs = [rng.choice(3, size=n, p=P_A if i in (1, 3) else P_N) for i in range(5)]
                v = run_test(seqs, 0.3, Alphabet(3))
                ok += v.set == OutlierSet([2, 4], 5)
            hits[n] = ok / 200
        assert hits[400] >= hits[20] and hits[400] > 0.95
