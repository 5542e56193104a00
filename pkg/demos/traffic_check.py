"""Histogram of machine-type activation times against the Beta(3, 4) density."""

import numpy as np
from scipy import stats

from dmdqsim.traffic import mtc_arrival_times, poisson_arrivals

rng = np.random.default_rng(1)
period = 10.0
t = mtc_arrival_times(rng, 100_000, period) / period

hist, edges = np.histogram(t, bins=10, range=(0, 1), density=True)
centers = (edges[:-1] + edges[1:]) / 2
print(" bin    empirical  beta(3,4)")
for c, h in zip(centers, hist):
    print(f"{c:4.2f}  {h:9.3f}  {stats.beta(3, 4).pdf(c):9.3f}  " + "#" * int(20 * h))
print("KS p-value:", round(stats.kstest(t, stats.beta(3, 4).cdf).pvalue, 3))

counts = [poisson_arrivals(np.random.default_rng(s), 50.0, 10.0).size for s in range(200)]
print(f"Poisson(50/s over 10 s): mean {np.mean(counts):.1f}, variance {np.var(counts, ddof=1):.1f} (both ~500)")
