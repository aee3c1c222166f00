"""Error rates on both sides of gd_min, with the exponential bounds alongside.

Also writes the report as CSV (``phase_transition.csv`` in the working
directory), the same format as ``oht simulate``.
"""

from oht import montecarlo, theory
from oht.distributions import bernoulli

sc = theory.Scenario.all_same(4, bernoulli(0.2), bernoulli(0.8))
B = sc.set([1])
g = theory.profile(B, sc).gd_min
grid = (25, 50, 100, 300, 1000)

for c in (0.5, 1.5):
    report = montecarlo.estimate(montecarlo.ExperimentSpec(sc, B, grid, c * g, trials=10_000, seed=11))
    print(f"lambda = {c} x gd_min")
    for row in report.rows:
        print(f"  n={row.n:5d}  reject {row.rate('reject'):.4f}  miscls {row.rate('miscls'):.4f}"
              f"  (miscls bound {min(row.bound_miscls, 1):.2e})")

# with no outliers at all the test should decline to name a set
null = montecarlo.estimate(montecarlo.ExperimentSpec(sc, None, grid, 0.5 * g, trials=10_000, seed=12))
for row in null.rows:
    print(f"null n={row.n:5d}  false alarm {row.rate('falarm'):.4f}")

with open("phase_transition.csv", "w", newline="") as fh:
    null.to_csv(fh)
