"""Spotting outlying sequences in a panel.

Run with ``python demos/01_detect_outliers.py``.
"""

import numpy as np

from oht import detector, theory
from oht.distributions import Alphabet, Distribution, empirical
from oht.hypotheses import enumerate_space

# A toy panel: the first sequence only ever emits "a", the rest only "b".
panel = ["aaaa", "bbbb", "bbbb", "bbbb"]
ab = Alphabet.from_symbols("ab")
types = [empirical(s, ab) for s in panel]

# With M = 4 sequences at most one can be an outlier, so there are four candidates.
space = enumerate_space(4)
print("candidate sets:", list(space))

table = detector.score_all(types, space)
for B, score in table.as_dict().items():
    print(f"  score{B!r:>6} = {score:.4f}")  # {1} scores 0, the rest log 3 + 2 log 1.5

# The test names the unique best set only when every other set scores above lambda.
for lam in (1.0, 2.5):
    print(f"lambda={lam}:", detector.decide(table, lam).to_json())

# A larger, noisy example: 6 sequences over three symbols, two of them anomalous.
rng = np.random.default_rng(7)
P_N = Distribution([0.6, 0.3, 0.1])
P_A = [Distribution([0.1, 0.3, 0.6]), Distribution([0.2, 0.6, 0.2])]
sc = theory.Scenario(6, P_N, tuple(P_A))
truth = sc.set([2, 5])
laws = theory.truth_masses(truth, sc)

for n in (20, 100, 500):
    seqs = [rng.choice(3, size=n, p=law) for law in laws]
    verdict = detector.run_test(seqs, lam=0.2, alphabet=Alphabet(3))
    print(f"n={n:4d}: {verdict.to_json()}")  # longer sequences pin down {2,5}
