"""Scalar observables of the random spanning tree: edge overlap and total length.

Exact values go through Kirchhoff's formula (``P(e in T) = w(e) R_eff(e)``);
Monte-Carlo values through independent tree samples.  Theory curves for the
two disorder regimes sit alongside for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .electrical import ConditioningError, build_network, edge_in_tree_probs
from .env import Environment
from .spanning import SpanningTree, TreeSampler, kruskal_mst

__all__ = [
    "ZETA3",
    "OverlapReport",
    "LengthReport",
    "overlap_exact",
    "overlap_mc",
    "overlap_theory_low",
    "overlap_report",
    "expected_length_exact",
    "length_mc",
    "length_theory_low",
    "length_reference_high",
    "length_report",
    "tree_length",
    "mst_length",
    "mu",
    "bernstein_bound",
    "bernstein_violation_rate",
]

ZETA3 = 1.2020569031595943
# below this the closed forms are replaced by their Taylor expansions
SERIES_CUTOFF = 1e-4


def _upper(m: np.ndarray) -> np.ndarray:
    iu, iv = np.triu_indices(m.shape[0], 1)
    return m[iu, iv]


def overlap_exact(env: Environment, beta: float) -> float:
    """Expected number of common edges of two independent trees, ``sum_e P(e in T)^2``.

    Raises :class:`ConditioningError` when conductances are too spread for a
    dense solve.
    """
    p = _upper(edge_in_tree_probs(build_network(env, beta)))
    return float(np.dot(p, p))


def expected_length_exact(env: Environment, beta: float) -> float:
    """Expected total weight of the tree, ``sum_e omega_e P(e in T)``."""
    p = _upper(edge_in_tree_probs(build_network(env, beta)))
    return float(np.dot(env.omega, p))


def _mean_stderr(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=np.float64)
    if x.size == 1:
        return float(x[0]), 0.0
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def overlap_mc(env: Environment, beta: float, pairs: int, seed, sampler: TreeSampler | None = None):
    """Mean overlap of ``pairs`` independent tree pairs and its standard error."""
    if pairs < 1:
        raise ValueError("pairs must be at least 1")
    sampler = sampler or TreeSampler(build_network(env, beta))
    rng = _rng(seed)
    vals = []
    for _ in range(pairs):
        a = sampler.sample(rng)
        b = sampler.sample(rng)
        vals.append(len(set(a.edges).intersection(b.edges)))
    return _mean_stderr(vals)


def tree_length(tree: SpanningTree, env: Environment) -> float:
    return float(env.omega[list(tree.edges)].sum())


def length_mc(env: Environment, beta: float, samples: int, seed, sampler: TreeSampler | None = None):
    """Mean sampled tree length and its standard error."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    sampler = sampler or TreeSampler(build_network(env, beta))
    rng = _rng(seed)
    return _mean_stderr([tree_length(sampler.sample(rng), env) for _ in range(samples)])


def mst_length(env) -> float:
    tree = kruskal_mst(env)
    if isinstance(env, Environment):
        return tree_length(tree, env)
    pos = np.searchsorted(env.edges, np.asarray(tree.edges))
    return float(env.omega[pos].sum())


def overlap_theory_low(beta: float) -> float:
    """Low-disorder overlap curve ``beta (1 - e^{-2 beta}) / (1 - e^{-beta})^2 = beta coth(beta/2)``."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    if beta < SERIES_CUTOFF:
        b2 = beta * beta
        return 2.0 + b2 / 6.0 - b2 * b2 / 360.0
    return float(beta / np.tanh(beta / 2.0))


def length_theory_low(n: int, beta: float) -> float:
    """Low-disorder length curve ``(n/beta)(1 - beta e^{-beta} - e^{-beta}) / (1 - e^{-beta})``."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    if beta < SERIES_CUTOFF:
        return n * (0.5 - beta / 12.0 + beta**3 / 720.0)
    # 1/expm1(beta) written without overflow for large beta
    return float(n * (1.0 / beta - np.exp(-beta) / -np.expm1(-beta)))


def length_reference_high() -> float:
    return ZETA3


def mu(beta: float) -> float:
    """Mean conductance ``E exp(-beta U) = (1 - e^{-beta}) / beta``."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    if beta < SERIES_CUTOFF:
        return 1.0 - beta / 2.0 + beta**2 / 6.0 - beta**3 / 24.0
    return float(-np.expm1(-beta) / beta)


def bernstein_bound(m: int, beta: float, delta: float) -> float:
    """Tail bound ``2 exp(-delta^2 m / (9 beta))`` for a sum of ``m`` conductances."""
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    if beta < 1.0:
        raise ValueError(f"the bound is stated for beta >= 1, got {beta}")
    if m < 0:
        raise ValueError("m must be non-negative")
    return float(2.0 * np.exp(-delta * delta * m / (9.0 * beta)))


def bernstein_violation_rate(m: int, beta: float, delta: float, reps: int, seed) -> float:
    """Fraction of simulated sums with ``|S_m - m mu| >= delta m mu``."""
    rng = _rng(seed)
    target = m * mu(beta)
    hits = 0
    chunk = max(1, 2_000_000 // max(m, 1))
    done = 0
    while done < reps:
        c = min(chunk, reps - done)
        s = np.exp(-beta * rng.random((c, m))).sum(axis=1)
        hits += int(np.count_nonzero(np.abs(s - target) >= delta * target))
        done += c
    return hits / reps


@dataclass(frozen=True)
class OverlapReport:
    n: int
    beta: float
    seed: int
    exact_value: Optional[float]
    mc_estimate: float
    mc_stderr: float
    mc_pairs: int
    theory_low: float
    reference_high: float
    exact_refusal: Optional[str] = None

    def __post_init__(self):
        top = self.n - 1 + 1e-9
        if self.exact_value is not None and not -1e-9 <= self.exact_value <= top:
            raise ValueError(f"exact overlap {self.exact_value} outside [0, n-1]")
        if not 0.0 <= self.mc_estimate <= top:
            raise ValueError(f"MC overlap {self.mc_estimate} outside [0, n-1]")


@dataclass(frozen=True)
class LengthReport:
    n: int
    beta: float
    seed: int
    expected_length_exact: Optional[float]
    mc_estimate: float
    mc_stderr: float
    theory_low: float
    zeta3: float
    mst_length: float
    min_sampled_length: float
    exact_refusal: Optional[str] = None

    def __post_init__(self):
        if self.min_sampled_length < self.mst_length - 1e-12:
            raise ValueError("a sampled tree is lighter than the minimum spanning tree")


def overlap_report(env: Environment, beta: float, pairs: int, seed) -> OverlapReport:
    try:
        exact, why = overlap_exact(env, beta), None
    except ConditioningError as err:
        exact, why = None, str(err)
    est, se = overlap_mc(env, beta, pairs, seed)
    return OverlapReport(env.n, float(beta), int(env.seed), exact, est, se, pairs,
                         overlap_theory_low(beta), float(env.n), why)


def length_report(env: Environment, beta: float, samples: int, seed) -> LengthReport:
    try:
        exact, why = expected_length_exact(env, beta), None
    except ConditioningError as err:
        exact, why = None, str(err)
    sampler = TreeSampler(build_network(env, beta))
    rng = _rng(seed)
    lengths = [tree_length(sampler.sample(rng), env) for _ in range(samples)]
    est, se = _mean_stderr(lengths)
    return LengthReport(env.n, float(beta), int(env.seed), exact, est, se,
                        length_theory_low(env.n, beta), ZETA3, mst_length(env), min(lengths), why)
