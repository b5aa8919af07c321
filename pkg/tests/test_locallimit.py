from itertools import permutations
from math import exp, factorial

import networkx as nx
import numpy as np
import pytest

from rstre.electrical import build_network
from rstre.env import sample_environment
from rstre.locallimit import (
    BallHistogram,
    ball,
    ball_agreement_rate,
    ball_edges,
    canonical_code,
    count_tree_maps,
    empirical_ball_distribution,
    mean_tree_moment,
    parse_code,
    poisson_survive_host,
    poisson_survive_law_r1,
    poisson_survive_moment,
    rooted_trees_up_to,
    sample_poisson_survive,
    tv_distance,
)
from rstre.spanning import SpanningTree, TreeSampler, enumerate_spanning_trees, kruskal_mst


def path(n):
    return SpanningTree.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star(n):
    return SpanningTree.from_edges(n, [(0, i) for i in range(1, n)])


def test_ball_examples():
    assert ball(path(6), 0, 0).code == "()"
    assert ball(star(6), 0, 1).code == "(" + "()" * 5 + ")"
    b = ball(path(6), 0, 2)
    assert b.code == "((()))" and b.vertex_count == 3
    with pytest.raises(ValueError):
        ball(path(3), 0, -1)


def test_codes_are_relabeling_invariant():
    t = SpanningTree.from_edges(6, [(0, 1), (0, 2), (2, 3), (2, 4), (4, 5)])
    code = canonical_code(t, 0)
    for perm in list(permutations(range(6)))[::37]:
        relabeled = SpanningTree.from_edges(6, [(perm[u], perm[v]) for u, v in [(0, 1), (0, 2), (2, 3), (2, 4), (4, 5)]])
        assert canonical_code(relabeled, perm[0]) == code


def test_small_shapes_distinct():
    codes = rooted_trees_up_to(3)
    assert sorted(codes) == sorted(["()", "(())", "(()())", "((()))"])
    assert canonical_code(parse_code("(()())"), 0) != canonical_code(parse_code("((()))"), 0)


@pytest.mark.parametrize("k,count", [(1, 1), (2, 1), (3, 2), (4, 4), (5, 9), (6, 20), (7, 48)])
def test_rooted_tree_counts(k, count):
    codes = [c for c in rooted_trees_up_to(k) if c.count("(") == k]
    assert len(codes) == count
    for c in codes:
        assert canonical_code(parse_code(c), 0) == c


def test_code_soundness_against_brute_force():
    # for every pair of shapes up to 6 vertices, equal codes iff a rooted isomorphism exists
    codes = rooted_trees_up_to(6)
    graphs = []
    for c in codes:
        adj = parse_code(c)
        g = nx.Graph([(u, v) for u in range(len(adj)) for v in adj[u]])
        g.add_node(0)
        nx.set_node_attributes(g, {x: x == 0 for x in g}, "root")
        graphs.append(g)
    match = nx.isomorphism.categorical_node_match("root", False)
    for i in range(len(codes)):
        for j in range(i + 1, len(codes)):
            if len(graphs[i]) == len(graphs[j]):
                assert not nx.is_isomorphic(graphs[i], graphs[j], node_match=match)


def test_cycle_detected():
    with pytest.raises(ValueError):
        canonical_code([[1, 2], [0, 2], [0, 1]], 0)


def test_ball_locality():
    base = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7)]
    far = [(0, 1), (1, 2), (2, 3), (3, 4), (3, 5), (5, 6), (5, 7)]
    assert ball(SpanningTree.from_edges(8, base), 0, 2) == ball(SpanningTree.from_edges(8, far), 0, 2)
    assert ball_edges(SpanningTree.from_edges(8, base), 0, 2) == ball_edges(SpanningTree.from_edges(8, far), 0, 2)


def test_poisson_survive():
    assert sample_poisson_survive(0, 1).code == "()"
    rng = np.random.default_rng(2)
    degrees = np.array([sample_poisson_survive(1, rng).vertex_count - 1 for _ in range(100_000)])
    assert abs(degrees.mean() - 2) <= 3 * degrees.std() / np.sqrt(degrees.size)
    for k in range(1, 7):
        p = exp(-1) / factorial(k - 1)
        assert abs(np.mean(degrees == k) - p) <= 3 * np.sqrt(p * (1 - p) / degrees.size)
    law = poisson_survive_law_r1()
    assert law.total == pytest.approx(1.0, abs=1e-12)
    assert law.frequencies()["(())"] == pytest.approx(exp(-1))


def test_tv_distance():
    a = BallHistogram(1, {"A": 1, "B": 1}, 2)
    assert tv_distance(a, a) == 0
    assert tv_distance(a, BallHistogram(1, {"C": 3}, 3)) == 1
    assert tv_distance(a, BallHistogram(1, {"A": 2}, 2)) == 0.5
    with pytest.raises(ValueError):
        tv_distance(a, BallHistogram(2, {"A": 2}, 2))


def test_empirical_distribution():
    sampler = TreeSampler(build_network(sample_environment(30, 1), 0.0))
    h = empirical_ball_distribution(sampler, 0, 0, 20, 1)
    assert h.counts == {"()": 20}
    h = empirical_ball_distribution(sampler, 0, 1, 200, 1)
    rng = np.random.default_rng(1)
    degrees = [len(sampler.sample(rng).adjacency[0]) for _ in range(200)]
    assert h.counts == {"(" + "()" * d + ")": degrees.count(d) for d in set(degrees)}


def test_tree_maps():
    assert count_tree_maps(path(3), 0, "()") == 1
    assert count_tree_maps(path(3), 0, "(())") == 1
    assert count_tree_maps(star(6), 0, "(())") == 5
    assert count_tree_maps(star(4), 0, "(()())") == 6
    assert count_tree_maps(path(4), 1, "((()))") == 1
    assert count_tree_maps(path(5), 2, "((()))") == 2


def test_tree_moments():
    sampler = TreeSampler(build_network(sample_environment(40, 2), 0.0))
    assert mean_tree_moment(sampler, "()", 50, 0) == 1.0
    est = mean_tree_moment(sampler, "(())", 4000, 0)
    assert est == pytest.approx(2 * 39 / 40, abs=0.05)
    for code in rooted_trees_up_to(3):
        mc = mean_tree_moment(poisson_survive_host(2), code, 50_000, 3)
        assert mc == pytest.approx(poisson_survive_moment(code), rel=0.03)


def test_ball_agreement():
    env = sample_environment(6, 3)
    mst = kruskal_mst(env)

    class Fixed:
        def sample(self, rng):
            return mst

    assert ball_agreement_rate(env, 1.0, 1, 10, 0, sampler=Fixed()) == 1.0
    dist = enumerate_spanning_trees(build_network(env, 0.0))
    target = ball_edges(mst, 0, 1)
    exact = sum(p for t, p in dist if ball_edges(t, 0, 1) == target)
    reps = 20_000
    rate = ball_agreement_rate(env, 0.0, 1, reps, 4)
    assert abs(rate - exact) <= 4 * np.sqrt(exact * (1 - exact) / reps)


def test_fixed_root_matches_random_root():
    n = 500
    env = sample_environment(n, 9)
    sampler = TreeSampler(build_network(env, np.log(n)))
    fixed = empirical_ball_distribution(sampler, 0, 1, 1500, 1)
    rng = np.random.default_rng(2)
    moving = BallHistogram(1)
    for _ in range(1500):
        moving.add(ball(sampler.sample(rng), int(rng.integers(n)), 1).code)
    # two independent 1500-sample histograms of a law concentrated on a few codes
    assert tv_distance(fixed, moving) <= 0.06


def test_uniform_tree_moments_match_poisson_survive():
    n = 2000
    sampler = TreeSampler(build_network(sample_environment(n, 4), 0.0))
    rng = np.random.default_rng(5)
    trees = [sampler.sample(rng) for _ in range(3000)]
    for code in rooted_trees_up_to(4):
        ust = np.mean([count_tree_maps(t, 0, code) for t in trees])
        ref = poisson_survive_moment(code, reps=100_000, seed=6)
        assert ust == pytest.approx(ref, rel=0.05), code
