from itertools import combinations

import numpy as np
import pytest

from rstre._sampler import UstSampler, mst_log_spread
from rstre.electrical import InfeasibleError, build_network, network_from_log_weights
from rstre.env import Environment, edge_index, sample_environment, sample_low_weight_environment
from rstre.oracles import subset_chi_square
from rstre.spanning import (
    SizeLimitError,
    SpanningTree,
    TreeSampler,
    _all_trees,
    enumerate_spanning_trees,
    kruskal_mst,
    mst_max_degree,
    wilson_sample,
)


def unit(n):
    return build_network(sample_environment(n, 0), 0.0)


def test_spanning_tree_validation():
    t = SpanningTree.from_edges(4, [(0, 1), (2, 1), (3, 2)])
    assert t.edges == tuple(sorted(edge_index(u, v, 4) for u, v in [(0, 1), (1, 2), (2, 3)]))
    assert SpanningTree.from_edges(4, t.edges) == t
    assert (2, 1) in t and (0, 3) not in t
    assert t.adjacency[1] == (0, 2)
    with pytest.raises(ValueError):
        SpanningTree.from_edges(4, [(0, 1), (1, 2), (0, 2)])
    with pytest.raises(ValueError):
        SpanningTree.from_edges(4, [(0, 1), (1, 2)])


@pytest.mark.parametrize("k,count", [(2, 1), (3, 3), (4, 16), (5, 125), (6, 1296)])
def test_cayley_counts(k, count):
    table = _all_trees(k)
    assert table.shape == (count, k - 1)
    assert len({tuple(r) for r in table.tolist()}) == count
    for row in table[:: max(1, count // 50)]:
        SpanningTree.from_edges(k, row)


def test_enumeration_probabilities():
    assert len(enumerate_spanning_trees(unit(3))) == 3
    net = build_network(sample_environment(4, 3), 1.5)
    dist = enumerate_spanning_trees(net)
    assert len(dist) == 16 and dist.probs.sum() == pytest.approx(1, abs=1e-12)
    w = np.array([np.prod([net.weight(*map(int, e)) for e in zip(*t.endpoints())]) for t, _ in dist])
    assert np.allclose(dist.probs, w / w.sum(), rtol=1e-12)
    with pytest.raises(SizeLimitError):
        enumerate_spanning_trees(unit(9))


def test_kruskal_examples():
    assert kruskal_mst(sample_environment(2, 1)).edges == (0,)
    env = Environment.from_weights(3, [0.1, 0.5, 0.9])
    assert kruskal_mst(env).edges == (0, 1)


def test_kruskal_is_brute_force_minimum():
    env = sample_environment(6, 21)
    lengths = env.omega[_all_trees(6)].sum(axis=1)
    best = _all_trees(6)[np.argmin(lengths)]
    assert kruskal_mst(env).edges == tuple(best)


def test_kruskal_low_weight_matches_dense_law():
    env = sample_low_weight_environment(3000, 4, 0.01)
    tree = kruskal_mst(env)
    assert len(tree.edges) == 2999
    with pytest.raises(InfeasibleError):
        kruskal_mst(sample_low_weight_environment(3000, 4, 1e-5))


def test_max_degree():
    path = SpanningTree.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    star = SpanningTree.from_edges(5, [(0, x) for x in range(1, 5)])
    assert mst_max_degree(path) == 2 and mst_max_degree(star) == 4


def test_k2_always_single_edge():
    rng = np.random.default_rng(0)
    s = TreeSampler(unit(2))
    assert all(s.sample(rng).edges == (0,) for _ in range(20))


def test_k3_uniform():
    s = TreeSampler(unit(3))
    rng = np.random.default_rng(1)
    n = 300_000
    counts = {}
    for _ in range(n):
        e = s.sample(rng).edges
        counts[e] = counts.get(e, 0) + 1
    assert len(counts) == 3
    sigma = np.sqrt(n * (1 / 3) * (2 / 3))
    for c in counts.values():
        assert abs(c - n / 3) <= 3 * sigma


def _chi(net, samples, seed, **kw):
    dist = enumerate_spanning_trees(net)
    sampler = TreeSampler(net)
    if kw:
        sampler._engine = UstSampler(net.log_weights, **kw)
    rng = np.random.default_rng(seed)
    counts = np.zeros(len(dist))
    for _ in range(samples):
        counts[dist.index_of(sampler.sample(rng))] += 1
    return subset_chi_square(counts, dist.probs)


@pytest.mark.parametrize("n,beta", [(4, 0.0), (4, 1.0), (4, 5.0), (5, 0.0), (5, 1.0), (5, 5.0)])
def test_sampler_chi_square(n, beta):
    p, ok = _chi(build_network(sample_environment(n, 40 + n), beta), 100_000, n)
    assert ok, p


@pytest.mark.parametrize("kw", [
    {"method": "wilson"},
    {"method": "hierarchical"},
    {"method": "hierarchical", "lrw_max": 0},
    {"method": "hierarchical", "lrw_max": 0, "trap_max": 2, "plain_spread": 0.0},
])
@pytest.mark.parametrize("beta", [2.0, 30.0, 400.0])
def test_sampler_engines_agree_with_enumeration(kw, beta):
    if kw["method"] == "wilson" and beta > 30:
        pytest.skip("plain walks are impractically slow here")
    p, ok = _chi(build_network(sample_environment(6, 5), beta), 20_000, 3, **kw)
    assert ok, p


def test_sampler_reproducible():
    net = build_network(sample_environment(40, 2), 200.0)
    a = [t.edges for t in TreeSampler(net).sample_many(5, 9)]
    b = [t.edges for t in TreeSampler(net).sample_many(5, 9)]
    assert a == b
    assert wilson_sample(net, 9).edges == a[0]


def test_high_beta_collapses_to_mst():
    env = sample_environment(60, 3)
    net = build_network(env, 60 * np.log(60) ** 4)
    mst = kruskal_mst(env)
    rng = np.random.default_rng(0)
    same = sum(TreeSampler(net).sample(rng) == mst for _ in range(20))
    assert same >= 15


def test_auto_method_selection():
    env = sample_environment(30, 1)
    assert TreeSampler(build_network(env, 1.0)).method == "wilson"
    assert TreeSampler(build_network(env, 500.0)).method == "hierarchical"
    assert mst_log_spread(build_network(env, 0.0).log_weights) == 0.0


def test_disconnected_sampler_refused():
    lw = np.full((4, 4), -np.inf)
    for a, b in combinations(range(3), 2):
        lw[a, b] = lw[b, a] = 0.0
    with pytest.raises(InfeasibleError):
        TreeSampler(network_from_log_weights(lw))


def test_mst_and_snapshot_components_coincide():
    from rstre.env import component_labels, edge_endpoints
    from rstre.env import component_stats, snapshot_graph
    n = 200
    env = sample_environment(n, 17)
    mst = np.array(kruskal_mst(env).edges)
    for c in (0.5, 2.0, 10.0):
        p = c / n
        g = snapshot_graph(env, p)
        u, v = g.endpoints()
        full = component_labels(n, u, v)
        keep = mst[env.omega[mst] <= p]
        mu_, mv = edge_endpoints(keep, n)
        sub = component_labels(n, np.atleast_1d(mu_), np.atleast_1d(mv))
        # equal partitions: the label maps are bijective on each other
        pairs = set(zip(full.tolist(), sub.tolist()))
        assert len(pairs) == len(set(full.tolist())) == len(set(sub.tolist()))
        assert component_stats(g).num_components == len(pairs)
