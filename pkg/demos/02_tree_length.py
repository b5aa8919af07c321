"""
Total length: from n/2 down to zeta(3)
======================================

Under the uniform tree the expected length is about n/2; the minimum spanning
tree of K_n has length close to zeta(3) = 1.202...  Here we follow the
expected length of the weighted tree as beta grows and compare it with the
low-disorder formula and with the MST.
"""

import numpy as np

from rstre import (
    ZETA3,
    ConditioningError,
    expected_length_exact,
    length_mc,
    length_theory_low,
    mst_length,
    sample_environment,
)

n = 500
env = sample_environment(n, seed=3)
print(f"n = {n}, MST length = {mst_length(env):.4f}, zeta(3) = {ZETA3:.4f}")

for beta in [1.0, np.log(n), 30.0, n / np.log(n) ** 2, n * np.log(n) ** 2, n * np.log(n) ** 5]:
    try:
        value, how = expected_length_exact(env, beta), "exact"
    except ConditioningError:
        value, _ = length_mc(env, beta, samples=20, seed=4)
        how = "sampled"
    print(f"beta = {beta:12.1f}: length {value:8.4f} ({how:7s}) low-disorder curve {length_theory_low(n, beta):8.4f}")

# The MST length over a handful of fresh environments, to see the zeta(3) limit
lengths = [mst_length(sample_environment(2000, s)) for s in range(5)]
print(f"MST length at n=2000 over 5 environments: mean {np.mean(lengths):.4f}")
