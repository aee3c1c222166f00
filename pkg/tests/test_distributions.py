import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oht.distributions import (
    Alphabet,
    AlphabetMismatch,
    Distribution,
    DistributionError,
    EmptySequence,
    SupportViolation,
    UnknownSymbol,
    WeightSumViolation,
    empirical,
    kl_divergence,
    mixture,
)


def prob_vectors(k):
    return st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k).map(lambda v: np.array(v) / np.sum(v))


class TestKL:
    def test_identical(self):
        p = Distribution([0.5, 0.5])
        assert kl_divergence(p, p) == 0.0

    def test_point_mass_against_third(self):
        assert kl_divergence(Distribution([1.0, 0.0]), Distribution([1 / 3, 2 / 3])) == pytest.approx(math.log(3))

    def test_biased_coin(self):
        expected = 0.9 * math.log(1.8) + 0.1 * math.log(0.2)
        assert kl_divergence(Distribution([0.9, 0.1]), Distribution([0.5, 0.5])) == pytest.approx(expected, abs=1e-15)

    def test_support_violation(self):
        with pytest.raises(SupportViolation):
            kl_divergence(Distribution([0.5, 0.5]), Distribution([1.0, 0.0]))

    def test_alphabet_mismatch(self):
        with pytest.raises(AlphabetMismatch):
            kl_divergence(Distribution([0.5, 0.5]), Distribution([0.2, 0.3, 0.5]))
        a = Distribution([0.5, 0.5], Alphabet.from_symbols("ab"))
        with pytest.raises(AlphabetMismatch):
            kl_divergence(a, Distribution([0.5, 0.5]))

    def test_gibbs_random_pairs(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            k = int(rng.integers(2, 6))
            p, q = Distribution(rng.dirichlet(np.ones(k))), Distribution(rng.dirichlet(np.ones(k)))
            d = kl_divergence(p, q)
            assert d >= 0
            assert (d == 0) == (p == q)

    @given(prob_vectors(4), st.integers(2, 6))
    def test_mixture_bound(self, base, k):
        rng = np.random.default_rng(int(base[0] * 1e6))
        comps = [Distribution(base)] + [Distribution(rng.dirichlet(np.ones(4))) for _ in range(k - 1)]
        m = mixture(np.full(k, 1 / k), comps)
        for c in comps:
            assert kl_divergence(c, m) <= math.log(k) + 1e-12


class TestDistribution:
    def test_renormalizes_within_tolerance(self):
        d = Distribution([0.5, 0.5 + 5e-13])
        assert d.mass.sum() == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("mass", [[0.6, 0.6], [-0.1, 1.1], [np.nan, 1.0], [1.0]])
    def test_rejects_invalid(self, mass):
        with pytest.raises(DistributionError):
            Distribution(mass)

    def test_strictly_positive_flag(self):
        assert Distribution([0.3, 0.7]).strictly_positive
        assert not Distribution([0.0, 1.0]).strictly_positive

    def test_immutable(self):
        d = Distribution([0.3, 0.7])
        with pytest.raises(ValueError):
            d.mass[0] = 0.5

    def test_json_roundtrip(self):
        d = Distribution([0.125, 0.375, 0.5])
        assert Distribution.from_json(d.to_json()) == d


class TestEmpirical:
    def test_string(self):
        e = empirical("aab", Alphabet.from_symbols("ab"))
        assert e.counts.tolist() == [2, 1] and e.n == 3

    def test_all_one_symbol(self):
        assert empirical("bbbb", Alphabet.from_symbols("ab")).counts.tolist() == [0, 4]

    def test_integer_array(self):
        e = empirical(np.array([0, 2, 2, 1]), Alphabet(3))
        assert e.counts.tolist() == [1, 1, 2]
        assert e.to_distribution() == Distribution([0.25, 0.25, 0.5])

    def test_empty(self):
        with pytest.raises(EmptySequence):
            empirical("", Alphabet.from_symbols("ab"))

    def test_unknown_symbol(self):
        with pytest.raises(UnknownSymbol):
            empirical("abc", Alphabet.from_symbols("ab"))
        with pytest.raises(UnknownSymbol):
            empirical(np.array([0, 3]), Alphabet(3))


class TestMixture:
    def test_idempotent(self):
        p = Distribution([0.2, 0.8])
        assert np.allclose(mixture([0.5, 0.5], [p, p]).mass, p.mass)

    def test_point_masses(self):
        m = mixture([1 / 3, 2 / 3], [Distribution([1, 0]), Distribution([0, 1])])
        assert np.allclose(m.mass, [1 / 3, 2 / 3])

    def test_outlier_mixture(self):
        # one anomalous and two nominal sequences remain outside C
        m = mixture([1 / 3, 2 / 3], [Distribution([0.8, 0.2]), Distribution([0.2, 0.8])])
        assert np.allclose(m.mass, [0.4, 0.6])

    def test_positive_if_a_weighted_component_is(self):
        m = mixture([0.5, 0.5], [Distribution([1, 0]), Distribution([0.5, 0.5])])
        assert m.strictly_positive

    @settings(max_examples=50)
    @given(st.permutations(range(3)))
    def test_permutation_invariant(self, perm):
        w = [0.2, 0.3, 0.5]
        comps = [Distribution([0.1, 0.9]), Distribution([0.6, 0.4]), Distribution([0.3, 0.7])]
        ref = mixture(w, comps).mass
        permuted = mixture([w[i] for i in perm], [comps[i] for i in perm]).mass
        assert np.allclose(ref, permuted, atol=1e-15)

    def test_errors(self):
        p, q = Distribution([0.5, 0.5]), Distribution([0.2, 0.3, 0.5])
        with pytest.raises(AlphabetMismatch):
            mixture([0.5, 0.5], [p, q])
        with pytest.raises(WeightSumViolation):
            mixture([0.5, 0.6], [p, p])
        with pytest.raises(WeightSumViolation):
            mixture([1.5, -0.5], [p, p])
