"""
The random graphs hidden in the environment
===========================================

Keeping the edges with weight at most p gives the Erdos-Renyi graph G(n, p),
for every p at once.  Component sizes near p = 1/n, the connectivity window
around log(n)/n and the degrees of the MST all come from the same weights.
"""

import numpy as np

from rstre import component_stats, connectivity_curve, kruskal_mst, mst_max_degree, sample_environment, snapshot_graph

n = 3000
env = sample_environment(n, seed=9)
for c in [0.5, 1.0, 2.0, 4.0]:
    stats = component_stats(snapshot_graph(env, c / n))
    second = stats.sizes[1] if stats.num_components > 1 else 0
    print(f"p = {c}/n: largest {stats.sizes[0]:5d}, second {second:4d}, components {stats.num_components}")

ps = [(np.log(n) + k) / n for k in (-2, 0, 2, 5)]
for (p, frac), k in zip(connectivity_curve(range(40), n, ps), (-2, 0, 2, 5)):
    print(f"p = (log n {k:+d})/n: connected in {frac:.0%} of 40 environments")

print(f"max degree of the MST: {mst_max_degree(kruskal_mst(env))} (log n = {np.log(n):.1f})")
