import mpmath
import numpy as np
import pytest

from rstre.electrical import ConditioningError, build_network
from rstre.env import Environment, sample_environment
from rstre.observables import (
    ZETA3,
    LengthReport,
    OverlapReport,
    bernstein_bound,
    bernstein_violation_rate,
    expected_length_exact,
    length_mc,
    length_reference_high,
    length_report,
    length_theory_low,
    mst_length,
    mu,
    overlap_exact,
    overlap_mc,
    overlap_report,
    overlap_theory_low,
    tree_length,
)
from rstre.spanning import enumerate_spanning_trees


def test_overlap_exact_examples():
    assert overlap_exact(sample_environment(3, 0), 0.0) == pytest.approx(4 / 3)
    for n in (5, 17, 60):
        assert overlap_exact(sample_environment(n, 1), 0.0) == pytest.approx(2 * (n - 1) / n)


def test_overlap_exact_matches_enumeration():
    env = sample_environment(6, 4)
    dist = enumerate_spanning_trees(build_network(env, 1.0))
    marg = np.zeros(15)
    for row, p in zip(dist.edge_table, dist.probs):
        marg[row] += p
    assert overlap_exact(env, 1.0) == pytest.approx(np.dot(marg, marg), abs=1e-12)


def test_overlap_mc():
    assert overlap_mc(sample_environment(2, 0), 1.0, 10, 0) == (1.0, 0.0)
    env = sample_environment(6, 4)
    est, se = overlap_mc(env, 1.0, 10_000, 5)
    assert abs(est - overlap_exact(env, 1.0)) <= 4 * se
    est, _ = overlap_mc(sample_environment(30, 2), 1e6, 20, 1)
    assert est == 29.0


def test_overlap_theory():
    assert overlap_theory_low(0.0) == 2.0
    assert overlap_theory_low(1e-6) == pytest.approx(2.0, abs=1e-12)
    exact = mpmath.mpf(1) * (1 - mpmath.e**-2) / (1 - mpmath.e**-1) ** 2
    assert overlap_theory_low(1.0) == pytest.approx(float(exact), rel=1e-14)
    assert overlap_theory_low(200.0) == pytest.approx(200.0, rel=1e-12)
    # the series and the closed form meet at the cutoff
    b = 1e-4
    assert overlap_theory_low(b * (1 - 1e-12)) == pytest.approx(overlap_theory_low(b), rel=1e-12)


def test_expected_length_exact():
    env = Environment.from_weights(3, [0.2, 0.3, 0.7])
    assert expected_length_exact(env, 0.0) == pytest.approx(2 / 3 * 1.2)
    env = sample_environment(6, 7)
    dist = enumerate_spanning_trees(build_network(env, 1.0))
    lengths = env.omega[dist.edge_table].sum(axis=1)
    assert expected_length_exact(env, 1.0) == pytest.approx(np.dot(lengths, dist.probs), abs=1e-9)
    assert 0 <= expected_length_exact(env, 3.0) <= 5


def test_length_mc_agrees():
    env = sample_environment(7, 3)
    est, se = length_mc(env, 2.0, 5000, 1)
    assert abs(est - expected_length_exact(env, 2.0)) <= 4 * se


def test_length_theory():
    assert length_theory_low(100, 0.0) == 50.0
    exact = 100 * (1 - 2 * mpmath.e**-1) / (1 - mpmath.e**-1)
    assert length_theory_low(100, 1.0) == pytest.approx(float(exact), rel=1e-14)
    assert length_theory_low(100, 500.0) == pytest.approx(100 / 500, rel=1e-12)


def test_zeta3():
    assert str(length_reference_high()).startswith("1.202")
    assert 1.2 < ZETA3 < 1.21
    k = np.arange(1, 10**6 + 1, dtype=np.float64)
    partial = np.sum(1.0 / k[::-1] ** 3)
    # tail of the sum beyond N lies between 1/(2(N+1)^2) and 1/(2N^2)
    assert abs(partial + 0.5 / (10**6 + 0.5) ** 2 - ZETA3) <= 1e-12
    assert ZETA3 == pytest.approx(float(mpmath.zeta(3)), rel=1e-15)


def test_mst_length():
    env = sample_environment(2, 3)
    assert mst_length(env) == env.omega[0]
    env = sample_environment(6, 5)
    dist = enumerate_spanning_trees(build_network(env, 0.0))
    assert mst_length(env) <= env.omega[dist.edge_table].sum(axis=1).min() + 1e-15


def test_mu():
    assert mu(0.0) == 1.0
    assert mu(1.0) == pytest.approx(1 - np.exp(-1))
    assert mu(1e4) == pytest.approx(1e-4, rel=1e-12)


def test_bernstein():
    assert bernstein_bound(0, 1.0, 0.5) == 2.0
    assert bernstein_bound(90_000, 1.0, 0.1) == pytest.approx(2 * np.exp(-100.0))
    assert bernstein_violation_rate(10_000, 2.0, 0.2, 10_000, 0) <= bernstein_bound(10_000, 2.0, 0.2)
    with pytest.raises(ValueError):
        bernstein_bound(10, 0.5, 0.1)
    with pytest.raises(ValueError):
        bernstein_bound(10, 1.0, 1.5)


def test_reports():
    env = sample_environment(8, 2)
    rep = overlap_report(env, 1.0, 200, 0)
    assert rep.exact_value is not None and rep.exact_refusal is None
    assert rep.reference_high == 8.0
    refused = overlap_report(sample_environment(8, 2), 500.0, 20, 0)
    assert refused.exact_value is None and "1e30" in refused.exact_refusal
    lr = length_report(env, 2.0, 50, 0)
    assert lr.min_sampled_length >= lr.mst_length
    with pytest.raises(ValueError):
        OverlapReport(3, 1.0, 0, 2.5, 1.0, 0.1, 10, 2.0, 3.0)
    with pytest.raises(ValueError):
        LengthReport(3, 1.0, 0, 1.0, 1.0, 0.1, 1.5, ZETA3, 0.5, 0.4)


def test_conditioning_refusal():
    with pytest.raises(ConditioningError):
        expected_length_exact(sample_environment(20, 0), 1000.0)


def test_tree_length():
    env = sample_environment(5, 0)
    from rstre.spanning import kruskal_mst
    t = kruskal_mst(env)
    assert tree_length(t, env) == pytest.approx(env.omega[list(t.edges)].sum())


def test_exact_and_mc_agree_on_a_grid():
    misses = 0
    points = [(n, b) for n in (5, 12, 40, 120) for b in (0.0, 2.0, 8.0, 20.0)]
    for i, (n, beta) in enumerate(points):
        env = sample_environment(n, 100 + i)
        est, se = overlap_mc(env, beta, 300, i)
        misses += abs(est - overlap_exact(env, beta)) > 4 * se
    assert misses == 0


def test_overlap_range_and_kirchhoff_consistency():
    from rstre.electrical import edges_in_tree_prob
    n = 12
    env = sample_environment(n, 8)
    for beta in (0.0, 1.0, 10.0, 40.0):
        ov = overlap_exact(env, beta)
        assert 2 * (n - 1) / n - 1e-12 <= ov <= n - 1 + 1e-12
    net = build_network(env, 3.0)
    direct = sum(edges_in_tree_prob(net, [(u, v)]) ** 2 for u in range(n) for v in range(u + 1, n))
    assert overlap_exact(env, 3.0) == pytest.approx(direct, rel=1e-8)


def test_mst_is_lighter_than_every_sample():
    from rstre.spanning import TreeSampler
    for seed, beta in [(1, 0.0), (2, 5.0), (3, 500.0)]:
        env = sample_environment(30, seed)
        sampler = TreeSampler(build_network(env, beta))
        rng = np.random.default_rng(seed)
        best = mst_length(env)
        assert all(tree_length(sampler.sample(rng), env) >= best - 1e-12 for _ in range(1000))


def test_theory_curve_limits():
    assert overlap_theory_low(1e3) / 1e3 == pytest.approx(1, abs=1e-3)
    assert length_theory_low(50, 1e3) * 1e3 / 50 == pytest.approx(1, abs=1e-3)
