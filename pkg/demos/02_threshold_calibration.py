"""Choosing the threshold from the second-order analysis.

The smallest rival divergence ``gd_min`` separates two regimes: thresholds
below it make false rejects vanish as ``n`` grows, thresholds above it make
them certain. ``lambda_star`` sits just below ``gd_min`` and targets a chosen
false-reject level.
"""

import numpy as np

from oht import montecarlo, theory
from oht.distributions import bernoulli

sc = theory.Scenario.all_same(4, bernoulli(0.2), bernoulli(0.8))
B = sc.set([1])

prof = theory.profile(B, sc)
print("GD to each rival:", np.round(prof.gd, 4))
print("gd_min =", round(prof.gd_min, 4), " attained by", prof.d, "rivals")
print("covariance V:\n", np.round(prof.V, 4))

# Leading-order false-reject curves around gd_min
for n in (100, 1000, 10_000):
    row = [theory.false_reject_bound(B, sc, c * prof.gd_min, n, prof=prof) for c in (0.8, 0.95, 1.0, 1.05, 1.2)]
    print(f"n={n:6d}  bound at (0.8, 0.95, 1, 1.05, 1.2) x gd_min:", np.round(row, 3))

# Calibrated thresholds for a 20% false-reject target
eps = 0.2
L = theory.l_star(eps, B, sc, prof=prof)
print(f"L* = {L:.4f}")
for n in (300, 1000, 3000):
    print(f"  lambda*({n}) = {theory.lambda_star(n, eps, B, sc, prof=prof):.5f}")

# Check against simulation
spec = montecarlo.ExperimentSpec(sc, B, (300, 1000, 3000), f"auto:{eps}", trials=10_000, seed=1)
for row in montecarlo.estimate(spec).rows:
    lo, hi = row.interval("reject")
    print(f"n={row.n:5d}  simulated false reject {row.rate('reject'):.3f}  [{lo:.3f}, {hi:.3f}]"
          f"  predicted {row.bound_reject:.3f}")
