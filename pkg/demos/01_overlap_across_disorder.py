"""
Edge overlap from uniform to minimum spanning tree
==================================================

Two trees drawn independently from the same environment share few edges when
beta is small and almost all of them when beta is large.  This script tracks
the expected overlap on one environment as beta grows, using the exact
Kirchhoff formula while the conductances are well conditioned and the sampler
beyond that.
"""

import numpy as np

from rstre import ConditioningError, overlap_exact, overlap_mc, overlap_theory_low, sample_environment

n = 300
env = sample_environment(n, seed=1)

# beta from 0 up to well past n log n
betas = [0.0, 1.0, np.log(n), 20.0, 60.0, n / np.log(n), n * np.log(n), n * np.log(n) ** 2]

print(f"n = {n}; UST overlap 2(n-1)/n = {2 * (n - 1) / n:.4f}")
print(f"{'beta':>10} {'exact':>10} {'sampled':>16} {'low-disorder curve':>20}")
for beta in betas:
    try:
        exact = f"{overlap_exact(env, beta):10.3f}"
    except ConditioningError:
        exact = f"{'refused':>10}"
    est, se = overlap_mc(env, beta, pairs=40, seed=2)
    print(f"{beta:10.2f} {exact} {est:9.2f} +- {se:4.2f} {overlap_theory_low(beta):20.3f}")

# At small beta the exact value follows beta*coth(beta/2); once beta is far
# above n the trees lock onto the MST and the overlap approaches n - 1.
