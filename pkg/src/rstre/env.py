"""Random environments on the complete graph and their Erdős–Rényi snapshots.

Edges of K_n are addressed by a canonical index: for ``u < v`` (0-based)

    idx(u, v) = u*n - u*(u+1)/2 + (v - u - 1)

which enumerates the strict upper triangle row by row (the order of
``numpy.triu_indices(n, 1)``).

Weights are generated by the Philox4x64 counter-based generator keyed with the
master seed: ``omega[e]`` is the ``e``-th double of the stream
``numpy.random.Generator(numpy.random.Philox(key=seed)).random()``.  Every
weight is therefore a pure function of ``(seed, e)`` and any block of edges can
be regenerated independently by advancing the counter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

__all__ = [
    "Environment",
    "LowWeightEnvironment",
    "SnapshotGraph",
    "ComponentStats",
    "UnionFind",
    "num_edges",
    "edge_index",
    "edge_endpoints",
    "sample_environment",
    "sample_low_weight_environment",
    "omega_block",
    "snapshot_graph",
    "layered_graph",
    "component_stats",
    "connectivity_curve",
    "derive_seed",
]

# Above this n the dense weight array is not materialized by connectivity_curve.
DENSE_LIMIT = 4000


def num_edges(n: int) -> int:
    return n * (n - 1) // 2


def edge_index(u, v, n: int):
    """Canonical index of the undirected edge {u, v}; works on arrays."""
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    lo = np.minimum(u, v)
    hi = np.maximum(u, v)
    if np.any(lo == hi):
        raise ValueError("self-loops have no edge index")
    idx = lo * n - lo * (lo + 1) // 2 + (hi - lo - 1)
    return int(idx) if idx.ndim == 0 else idx


def edge_endpoints(idx, n: int):
    """Inverse of :func:`edge_index`; returns ``(u, v)`` with ``u < v``."""
    idx = np.asarray(idx, dtype=np.int64)
    # row u starts at s(u) = u*(2n - u - 1)/2; solve s(u) <= idx with floats, then fix
    b = 2.0 * n - 1.0
    u = np.floor((b - np.sqrt(b * b - 8.0 * idx.astype(np.float64))) / 2.0).astype(np.int64)
    u = np.clip(u, 0, n - 2)
    start = u * (2 * n - u - 1) // 2
    too_far = start > idx
    while np.any(too_far):
        u = np.where(too_far, u - 1, u)
        start = u * (2 * n - u - 1) // 2
        too_far = start > idx
    nxt = (u + 1) * (2 * n - u - 2) // 2
    short = idx >= nxt
    while np.any(short):
        u = np.where(short, u + 1, u)
        start = u * (2 * n - u - 1) // 2
        nxt = (u + 1) * (2 * n - u - 2) // 2
        short = idx >= nxt
    v = idx - start + u + 1
    if u.ndim == 0:
        return int(u), int(v)
    return u, v


def derive_seed(master_seed: int, *key: int) -> int:
    """Deterministic 64-bit child seed of ``master_seed`` for an integer key path."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.count = n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.count -= 1
        return True


@dataclass(frozen=True, eq=False)
class Environment:
    """i.i.d. uniform edge weights on K_n, indexed canonically."""

    n: int
    omega: np.ndarray = field(repr=False)
    seed: int

    def __post_init__(self):
        self.omega.setflags(write=False)

    @property
    def num_edges(self) -> int:
        return num_edges(self.n)

    def weight(self, u: int, v: int) -> float:
        return float(self.omega[edge_index(u, v, self.n)])

    def matrix(self) -> np.ndarray:
        """Dense symmetric ``n x n`` weight matrix with ``nan`` on the diagonal."""
        m = np.full((self.n, self.n), np.nan)
        iu, iv = np.triu_indices(self.n, 1)
        m[iu, iv] = self.omega
        m[iv, iu] = self.omega
        return m

    @classmethod
    def from_weights(cls, n: int, omega, seed: int = 0) -> "Environment":
        """Wrap a given weight array (for hand-built test cases)."""
        omega = np.array(omega, dtype=np.float64)
        if n < 2:
            raise ValueError("n must be at least 2")
        if omega.shape != (num_edges(n),):
            raise ValueError(f"expected {num_edges(n)} weights, got {omega.shape}")
        if np.any((omega < 0) | (omega > 1)):
            raise ValueError("weights must lie in [0, 1]")
        return cls(n, _break_ties(omega), seed)


@dataclass(frozen=True, eq=False)
class LowWeightEnvironment:
    """The edges of a K_n environment whose weight is at most ``p_max``.

    Used when ``n(n-1)/2`` weights are too many to materialize.  The law of
    ``(edge set, weights)`` is exactly that of the corresponding restriction
    of a full environment, but the realization for a given seed differs from
    :func:`sample_environment`.
    """

    n: int
    p_max: float
    edges: np.ndarray = field(repr=False)   # sorted canonical indices
    omega: np.ndarray = field(repr=False)   # weights aligned with ``edges``
    seed: int


def _break_ties(omega: np.ndarray) -> np.ndarray:
    """Nudge bit-exact duplicates upward, lower edge index keeping its value."""
    order = np.lexsort((np.arange(omega.size), omega))
    s = omega[order]
    if s.size < 2 or np.all(np.diff(s) > 0):
        return omega
    s = s.copy()
    for i in np.flatnonzero(np.diff(s) <= 0) + 1:
        j = i
        while j < s.size and s[j] <= s[j - 1]:
            s[j] = np.nextafter(s[j - 1], np.inf)
            j += 1
    out = np.empty_like(omega)
    out[order] = s
    return out


def omega_block(seed: int, start: int, count: int) -> np.ndarray:
    """Raw weights of canonical edges ``start .. start+count-1`` (before tie-breaking)."""
    bitgen = np.random.Philox(key=int(seed))
    # each counter step yields four 64-bit words; one double per word
    bitgen.advance(start // 4)
    skip = start % 4
    out = np.random.Generator(bitgen).random(count + skip)
    return out[skip:]


def sample_environment(n: int, seed: int) -> Environment:
    """Dense environment of ``n(n-1)/2`` uniform weights, a pure function of ``(n, seed)``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    omega = omega_block(seed, 0, num_edges(n))
    return Environment(n, _break_ties(omega), int(seed))


def sample_low_weight_environment(n: int, seed: int, p_max: float) -> LowWeightEnvironment:
    """Sample only the edges with weight ``<= p_max`` (law-exact, never builds the full array)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0.0 <= p_max <= 1.0:
        raise ValueError("p_max must lie in [0, 1]")
    total = num_edges(n)
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    m = int(rng.binomial(total, p_max))
    chosen = np.unique(rng.integers(0, total, size=m))
    while chosen.size < m:
        extra = rng.integers(0, total, size=m - chosen.size)
        chosen = np.unique(np.concatenate([chosen, extra]))
    omega = _break_ties(p_max * rng.random(m))
    return LowWeightEnvironment(n, float(p_max), chosen, omega, int(seed))


@dataclass(frozen=True, eq=False)
class SnapshotGraph:
    """Edges of an environment whose weight falls in a threshold window."""

    n: int
    edges: np.ndarray = field(repr=False)
    p_lo: float
    p_hi: float
    closed: bool = True  # whether p_hi itself is included

    def endpoints(self):
        return edge_endpoints(self.edges, self.n)

    def contains(self, u: int, v: int) -> bool:
        idx = edge_index(u, v, self.n)
        pos = np.searchsorted(self.edges, idx)
        return bool(pos < self.edges.size and self.edges[pos] == idx)


@dataclass(frozen=True)
class ComponentStats:
    sizes: tuple
    is_connected: bool
    num_components: int


def _indexed_weights(env):
    if isinstance(env, LowWeightEnvironment):
        return env.edges, env.omega
    return np.arange(env.omega.size, dtype=np.int64), env.omega


def snapshot_graph(env, p: float) -> SnapshotGraph:
    """The coupled G(n, p): all edges with ``omega <= p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if isinstance(env, LowWeightEnvironment) and p > env.p_max:
        raise ValueError(f"p={p} exceeds the sampled range p_max={env.p_max}")
    idx, omega = _indexed_weights(env)
    return SnapshotGraph(env.n, idx[omega <= p], 0.0, float(p), True)


def layered_graph(env, p0: float, p1: float) -> SnapshotGraph:
    """Edges with ``p0 <= omega < p1``."""
    if not (0.0 <= p0 < p1 <= 1.0):
        raise ValueError(f"need 0 <= p0 < p1 <= 1, got ({p0}, {p1})")
    if isinstance(env, LowWeightEnvironment) and p1 > env.p_max:
        raise ValueError(f"p1={p1} exceeds the sampled range p_max={env.p_max}")
    idx, omega = _indexed_weights(env)
    return SnapshotGraph(env.n, idx[(omega >= p0) & (omega < p1)], float(p0), float(p1), False)


def component_labels(n: int, u, v) -> np.ndarray:
    """Connected-component label of each vertex for the edge list ``(u, v)``."""
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    adj = coo_matrix((np.ones(u.size, dtype=np.int8), (u, v)), shape=(n, n))
    _, labels = connected_components(adj, directed=False)
    return labels


def component_stats(g: SnapshotGraph) -> ComponentStats:
    u, v = g.endpoints()
    labels = component_labels(g.n, u, v)
    sizes = np.sort(np.bincount(labels))[::-1]
    return ComponentStats(tuple(int(s) for s in sizes), sizes.size == 1, int(sizes.size))


def connectivity_curve(env_seeds, n: int, p_values) -> list[tuple[float, float]]:
    """Fraction of seeds whose coupled ``G(n, p)`` is connected, for each ``p``."""
    p_values = [float(p) for p in p_values]
    for p in p_values:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {p}")
    seeds = list(env_seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    connected = np.zeros(len(p_values))
    p_top = max(p_values)
    for seed in seeds:
        if n <= DENSE_LIMIT:
            env = sample_environment(n, seed)
        else:
            env = sample_low_weight_environment(n, seed, p_top)
        for j, p in enumerate(p_values):
            connected[j] += component_stats(snapshot_graph(env, p)).is_connected
    return [(p, float(c / len(seeds))) for p, c in zip(p_values, connected)]
