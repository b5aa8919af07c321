"""Small-instance consistency checks between independent computations.

Each check compares two routes to the same quantity (determinants against
enumeration, sampling against enumeration, closed forms against solves) and
returns a :class:`CheckResult`.  ``run_all`` is what ``rstre-lab verify`` runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.stats import chi2

from .electrical import (
    build_network,
    contract,
    edge_in_tree_probs,
    effective_resistance,
    flow_energy,
    nash_williams_lower_bound,
    network_from_log_weights,
    pairwise_resistances,
    transfer_impedance_matrix,
)
from .env import Environment, derive_seed, sample_environment
from .spanning import ENUMERATION_LIMIT, SizeLimitError, TreeSampler, enumerate_spanning_trees, kruskal_mst

__all__ = ["CheckResult", "FAULTS", "run_all"] + [
    "check_determinants",
    "check_foster",
    "check_sampler",
    "check_monotonicity",
    "check_flow_additivity",
    "check_nash_williams",
    "check_mode_is_mst",
    "subset_chi_square",
]

FAULTS = ("weight-perturbation",)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    metric: float
    detail: str

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(self, "metric", float(self.metric))


def _random_env(n: int, seed: int) -> Environment:
    return sample_environment(n, seed)


def subset_chi_square(counts, probs, alpha: float = 1e-3):
    """Pearson test of observed tree counts against exact probabilities.

    Cells with expected count below 5 are pooled into one.  Returns
    ``(p_value, passed)``.
    """
    counts = np.asarray(counts, dtype=np.float64)
    expected = np.asarray(probs) * counts.sum()
    big = expected >= 5.0
    obs = list(counts[big])
    exp_ = list(expected[big])
    if (~big).any() and expected[~big].sum() > 0:
        obs.append(counts[~big].sum())
        exp_.append(expected[~big].sum())
    obs, exp_ = np.array(obs), np.array(exp_)
    if obs.size < 2:
        ok = bool(np.all(obs == exp_))
        return (1.0 if ok else 0.0), ok
    stat = float(np.sum((obs - exp_) ** 2 / exp_))
    p = float(chi2.sf(stat, obs.size - 1))
    return p, p >= alpha


def check_determinants(n_values=(4, 5, 6), graphs=30, betas=(0.0, 1.0, 5.0), max_subset=3,
                       seed=0, fault=None, tol=1e-9) -> CheckResult:
    """det(Y) on every edge subset of size <= max_subset against enumeration."""
    worst = 0.0
    count = 0
    for i in range(graphs):
        n = n_values[i % len(n_values)]
        beta = betas[(i // len(n_values)) % len(betas)]
        if n > ENUMERATION_LIMIT:
            raise SizeLimitError(f"enumeration is limited to {ENUMERATION_LIMIT} vertices, got {n}")
        env = _random_env(n, derive_seed(seed, 1, i))
        net = build_network(env, beta)
        dist = enumerate_spanning_trees(net)
        det_net = net
        if fault == "weight-perturbation":
            lw = np.array(net.log_weights)
            lw[0, 1] = lw[1, 0] = lw[0, 1] + 0.05
            det_net = network_from_log_weights(lw, beta)
        edges = list(combinations(range(n), 2))
        ymat = transfer_impedance_matrix(det_net, edges)
        # tree membership per edge, for fast subset probabilities
        member = np.zeros((len(dist), len(edges)), dtype=bool)
        for j, (u, v) in enumerate(edges):
            member[:, j] = np.any(dist.edge_table == (u * n - u * (u + 1) // 2 + (v - u - 1)), axis=1)
        for size in range(1, max_subset + 1):
            for sub in combinations(range(len(edges)), size):
                idx = list(sub)
                det = float(np.linalg.det(ymat[np.ix_(idx, idx)]))
                exact = float(dist.probs[member[:, idx].all(axis=1)].sum())
                worst = max(worst, abs(det - exact))
                count += 1
    return CheckResult("determinant_vs_enumeration", worst <= tol, worst,
                       f"{count} subsets, max |det - enum| = {worst:.3g}")


def check_foster(n_values=(10, 50), envs=5, betas=(0.0, 1.0, 5.0), seed=0) -> CheckResult:
    """Sum of w(e) R(e) equals n - 1; every edge probability lies in [0, 1]."""
    worst = 0.0
    ok = True
    for n in n_values:
        for i in range(envs):
            env = _random_env(n, derive_seed(seed, 2, n, i))
            for beta in betas:
                p = edge_in_tree_probs(build_network(env, beta))
                total = p[np.triu_indices(n, 1)].sum()
                err = abs(total - (n - 1)) / n
                worst = max(worst, err)
                ok &= err <= 1e-8 and p.min() >= -1e-12 and p.max() <= 1 + 1e-12
    return CheckResult("foster_kirchhoff", bool(ok), worst, f"max |sum - (n-1)|/n = {worst:.3g}")


def check_sampler(n_values=(4, 5), betas=(0.0, 2.0), samples=20_000, seed=0, alpha=1e-3) -> CheckResult:
    """Chi-square of sampled tree frequencies against enumeration."""
    worst_p = 1.0
    ok = True
    for n in n_values:
        if n > ENUMERATION_LIMIT:
            raise SizeLimitError(f"enumeration is limited to {ENUMERATION_LIMIT} vertices, got {n}")
        env = _random_env(n, derive_seed(seed, 3, n))
        for beta in betas:
            net = build_network(env, beta)
            dist = enumerate_spanning_trees(net)
            sampler = TreeSampler(net)
            rng = np.random.default_rng(derive_seed(seed, 3, n, int(beta * 1000)))
            counts = np.zeros(len(dist))
            for _ in range(samples):
                counts[dist.index_of(sampler.sample(rng))] += 1
            p, passed = subset_chi_square(counts, dist.probs, alpha)
            worst_p = min(worst_p, p)
            ok &= passed
    return CheckResult("sampler_chi_square", bool(ok), worst_p, f"min p-value = {worst_p:.3g}")


def check_monotonicity(trials=200, n=6, seed=0, tol=1e-10) -> CheckResult:
    """Raising a conductance or contracting an edge never increases a resistance."""
    rng = np.random.default_rng(derive_seed(seed, 4))
    worst = 0.0
    for _ in range(trials):
        env = _random_env(n, int(rng.integers(2**62)))
        beta = float(rng.choice([0.0, 1.0, 5.0]))
        net = build_network(env, beta)
        r0 = pairwise_resistances(net)
        a, b = rng.choice(n, 2, replace=False)
        lw = np.array(net.log_weights)
        lw[a, b] = lw[b, a] = lw[a, b] + float(rng.uniform(0.0, 2.0))
        r1 = pairwise_resistances(network_from_log_weights(lw, beta))
        worst = max(worst, float((r1 - r0).max()))
        u, v = rng.choice(n, 2, replace=False)
        others = [x for x in range(n) if x not in (a, b)]
        merged = contract(net, (int(a), int(b)))
        # vertex x of net sits at index 1 + others.index(x) after contraction
        def pos(x):
            return 0 if x in (a, b) else 1 + others.index(x)
        if pos(u) != pos(v):
            rc = effective_resistance(merged, pos(u), pos(v))
            worst = max(worst, rc - r0[u, v])
    return CheckResult("rayleigh_contraction", worst <= tol, worst, f"max increase = {worst:.3g}")


def check_flow_additivity(instances=100, seed=0, tol=1e-12) -> CheckResult:
    """Energy of a convex mix of unit flows on disjoint edges is the weighted sum of energies."""
    rng = np.random.default_rng(derive_seed(seed, 5))
    worst = 0.0
    for _ in range(instances):
        n = int(rng.integers(4, 9))
        env = _random_env(n, int(rng.integers(2**62)))
        net = build_network(env, float(rng.choice([0.0, 1.0, 5.0])))
        # edge-disjoint 0 -> 1 paths: the direct edge and 0 -> x -> 1 for each other x
        flows = []
        direct = np.zeros((n, n))
        direct[0, 1], direct[1, 0] = 1.0, -1.0
        flows.append(direct)
        for x in range(2, n):
            t = np.zeros((n, n))
            t[0, x], t[x, 0] = 1.0, -1.0
            t[x, 1], t[1, x] = 1.0, -1.0
            flows.append(t)
        alpha = rng.dirichlet(np.ones(len(flows)))
        mix = sum(a * t for a, t in zip(alpha, flows))
        lhs = flow_energy(net, mix)
        rhs = sum(a * a * flow_energy(net, t) for a, t in zip(alpha, flows))
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
    return CheckResult("flow_additivity", worst <= tol, worst, f"max relative gap = {worst:.3g}")


def check_nash_williams(instances=100, n=6, seed=0) -> CheckResult:
    """P(e in T) >= w(e) / (total conductance at either endpoint)."""
    rng = np.random.default_rng(derive_seed(seed, 6))
    worst = -np.inf
    for _ in range(instances):
        env = _random_env(n, int(rng.integers(2**62)))
        net = build_network(env, float(rng.choice([0.0, 1.0, 5.0])))
        p = edge_in_tree_probs(net)
        for u, v in combinations(range(n), 2):
            for centre in (u, v):
                star = [(centre, x) for x in range(n) if x != centre]
                bound = nash_williams_lower_bound(net, (u, v), star)
                worst = max(worst, bound - p[u, v])
    return CheckResult("nash_williams", worst <= 1e-12, float(worst), f"max bound - P = {worst:.3g}")


def check_mode_is_mst(envs=15, n_values=(5, 6, 7), betas=(0.5, 1.0, 10.0), seed=0) -> CheckResult:
    """The most likely tree is the minimum spanning tree, for every beta."""
    bad = 0
    for i in range(envs):
        n = n_values[i % len(n_values)]
        env = _random_env(n, derive_seed(seed, 7, i))
        mst = kruskal_mst(env)
        for beta in betas:
            if enumerate_spanning_trees(build_network(env, beta)).argmax() != mst:
                bad += 1
    return CheckResult("mode_is_mst", bad == 0, float(bad), f"{bad} mismatches")


def run_all(seed=0, n_values=(4, 5, 6), fault=None, quick=True) -> list[CheckResult]:
    """The whole suite; ``n_values`` sets the enumeration sizes used by the exact checks."""
    scale = 1 if quick else 5
    small = tuple(n for n in n_values if n <= 5) or n_values[:1]
    return [
        check_determinants(n_values, graphs=6 * scale, seed=seed, fault=fault),
        check_foster(seed=seed, envs=2 * scale),
        check_sampler(small, samples=5_000 * scale, seed=seed),
        check_monotonicity(trials=50 * scale, seed=seed),
        check_flow_additivity(instances=20 * scale, seed=seed),
        check_nash_williams(instances=10 * scale, seed=seed),
        check_mode_is_mst(envs=6 * scale, seed=seed),
    ]
