"""
What the tree looks like from vertex 0
======================================

For moderate beta the neighbourhood of a fixed vertex looks like the
Poisson(1) branching process conditioned to survive: the root has 1 +
Poisson(1) children.  For very large beta the sampled tree agrees with the
MST around the root.  We compare both with a few hundred samples.
"""

import numpy as np

from rstre import (
    TreeSampler,
    ball_agreement_rate,
    build_network,
    empirical_ball_distribution,
    poisson_survive_law_r1,
    sample_environment,
    tv_distance,
)

n = 1000
env = sample_environment(n, seed=5)

sampler = TreeSampler(build_network(env, np.log(n)))
hist = empirical_ball_distribution(sampler, v=0, r=1, reps=400, seed=6)
law = poisson_survive_law_r1()
print(f"beta = log n: TV(root ball, 1+Poisson(1)) = {tv_distance(hist, law):.3f} from 400 samples")
for code, freq in sorted(hist.frequencies().items(), key=lambda kv: len(kv[0])):
    deg = code.count("(") - 1
    print(f"  root degree {deg}: sampled {freq:.3f}  limit {law.frequencies().get(code, 0.0):.3f}")

# a single environment is enough to see the collapse onto the MST
m = 300
env = sample_environment(m, seed=7)
for beta in [m / np.log(m), m * np.log(m) ** 2, m * np.log(m) ** 4]:
    rate = ball_agreement_rate(env, beta, r=1, reps=50, seed=8)
    print(f"n = {m}, beta = {beta:10.1f}: radius-1 ball equals the MST ball in {rate:.0%} of samples")
