"""Spanning trees: sampling from the weighted measure, Kruskal, and brute-force enumeration."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.special import logsumexp

from ._sampler import UstSampler
from .electrical import InfeasibleError, WeightedNetwork
from .env import LowWeightEnvironment, UnionFind, edge_endpoints, edge_index

__all__ = [
    "SpanningTree",
    "TreeDistribution",
    "SizeLimitError",
    "TreeSampler",
    "wilson_sample",
    "kruskal_mst",
    "enumerate_spanning_trees",
    "mst_max_degree",
    "ENUMERATION_LIMIT",
]

ENUMERATION_LIMIT = 8


class SizeLimitError(ValueError):
    """Raised when a brute-force routine is asked for a graph that is too large."""


@dataclass(frozen=True)
class SpanningTree:
    """A spanning tree of K_n stored by canonical edge indices (sorted)."""

    n: int
    edges: tuple
    adjacency: tuple = field(repr=False, compare=False)

    @classmethod
    def from_edges(cls, n: int, edges) -> "SpanningTree":
        """Build and validate from canonical indices or from ``(u, v)`` pairs."""
        edges = list(edges)
        if edges and not np.isscalar(edges[0]):
            pairs = [(int(a), int(b)) for a, b in edges]
        elif edges:
            us, vs = edge_endpoints(np.asarray(edges, dtype=np.int64), n)
            pairs = list(zip(np.atleast_1d(us).tolist(), np.atleast_1d(vs).tolist()))
        else:
            pairs = []
        if len(pairs) != n - 1:
            raise ValueError(f"a spanning tree of {n} vertices has {n - 1} edges, got {len(pairs)}")
        adj = [[] for _ in range(n)]
        uf = UnionFind(n)
        idx = []
        for u, v in pairs:
            if u > v:
                u, v = v, u
            if u < 0 or v >= n or u == v:
                raise ValueError(f"({u}, {v}) is not an edge of K_{n}")
            if not uf.union(u, v):
                raise ValueError("edge set contains a cycle or a repeated edge")
            adj[u].append(v)
            adj[v].append(u)
            idx.append(u * n - u * (u + 1) // 2 + (v - u - 1))
        idx.sort()
        return cls(n, tuple(idx), tuple(tuple(sorted(a)) for a in adj))

    @classmethod
    def _trusted(cls, n: int, idx) -> "SpanningTree":
        """Build from canonical indices already known to form a spanning tree."""
        idx = np.sort(np.asarray(idx, dtype=np.int64))
        u, v = edge_endpoints(idx, n)
        ends = np.concatenate([np.atleast_1d(u), np.atleast_1d(v)])
        nbrs = np.concatenate([np.atleast_1d(v), np.atleast_1d(u)])
        order = np.lexsort((nbrs, ends))
        cuts = [0] + np.searchsorted(ends[order], np.arange(1, n)).tolist() + [ends.size]
        flat = nbrs[order].tolist()
        adj = tuple(tuple(flat[a:b]) for a, b in zip(cuts[:-1], cuts[1:]))
        return cls(n, tuple(idx.tolist()), adj)

    def endpoints(self):
        u, v = edge_endpoints(np.asarray(self.edges, dtype=np.int64), self.n)
        return np.atleast_1d(u), np.atleast_1d(v)

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    def __contains__(self, e) -> bool:
        if not np.isscalar(e):
            e = edge_index(e[0], e[1], self.n)
        i = int(np.searchsorted(self.edges, e))
        return i < len(self.edges) and self.edges[i] == e


@lru_cache(maxsize=None)
def _all_trees(k: int) -> np.ndarray:
    """Canonical edge indices of every labeled tree on ``k`` vertices, shape ``(k**(k-2), k-1)``."""
    if k == 1:
        return np.zeros((1, 0), dtype=np.int64)
    if k == 2:
        return np.zeros((1, 1), dtype=np.int64)
    m = k - 2
    count = k ** m
    # every Prüfer sequence, one row each
    seq = (np.arange(count)[:, None] // k ** np.arange(m - 1, -1, -1)[None, :]) % k
    deg = np.ones((count, k), dtype=np.int64)
    rows = np.arange(count)
    for j in range(m):
        np.add.at(deg, (rows, seq[:, j]), 1)
    us = np.empty((count, k - 1), dtype=np.int64)
    vs = np.empty((count, k - 1), dtype=np.int64)
    for j in range(m):
        leaf = np.argmax(deg == 1, axis=1)
        us[:, j], vs[:, j] = leaf, seq[:, j]
        deg[rows, leaf] = 0
        deg[rows, seq[:, j]] -= 1
    last = np.argsort(deg != 1, axis=1, kind="stable")[:, :2]
    us[:, -1], vs[:, -1] = last[:, 0], last[:, 1]
    idx = np.sort(edge_index(us, vs, k), axis=1)
    out = idx[np.lexsort(idx.T[::-1])]
    out.setflags(write=False)
    return out


class TreeDistribution:
    """Every spanning tree of a small network with its exact probability."""

    def __init__(self, k: int, edge_table: np.ndarray, probs: np.ndarray):
        self.k = k
        self.edge_table = edge_table
        self.probs = probs
        self._lookup = None

    def __len__(self) -> int:
        return self.probs.size

    def __iter__(self):
        for row, p in zip(self.edge_table, self.probs):
            yield SpanningTree.from_edges(self.k, row), float(p)

    def tree(self, i: int) -> SpanningTree:
        return SpanningTree.from_edges(self.k, self.edge_table[i])

    def argmax(self) -> SpanningTree:
        return self.tree(int(np.argmax(self.probs)))

    def index_of(self, tree: SpanningTree) -> int:
        if self._lookup is None:
            self._lookup = {tuple(r): i for i, r in enumerate(self.edge_table.tolist())}
        return self._lookup[tuple(tree.edges)]

    def probability(self, tree: SpanningTree) -> float:
        return float(self.probs[self.index_of(tree)])

    def edge_set_probability(self, edges) -> float:
        """P(all the given ``(u, v)`` edges lie in the tree)."""
        pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if pairs.size == 0:
            return 1.0
        want = edge_index(pairs[:, 0], pairs[:, 1], self.k)
        mask = np.ones(self.probs.size, dtype=bool)
        for e in np.atleast_1d(want):
            mask &= np.any(self.edge_table == e, axis=1)
        return float(self.probs[mask].sum())


def enumerate_spanning_trees(net: WeightedNetwork) -> TreeDistribution:
    """Exact law of the weighted spanning tree by listing all trees (at most 8 vertices)."""
    k = net.k
    if k > ENUMERATION_LIMIT:
        raise SizeLimitError(f"enumeration is limited to {ENUMERATION_LIMIT} vertices, got {k}")
    if not net.is_connected():
        raise InfeasibleError("network is disconnected")
    table = _all_trees(k)
    iu, iv = np.triu_indices(k, 1)
    edge_lw = net.log_weights[iu, iv]
    lw = edge_lw[table].sum(axis=1) if table.shape[1] else np.zeros(1)
    keep = np.isfinite(lw)
    table, lw = table[keep], lw[keep]
    probs = np.exp(lw - logsumexp(lw))
    return TreeDistribution(k, table, probs)


def kruskal_mst(env) -> SpanningTree:
    """Minimum-weight spanning tree of the environment (ties by canonical index).

    Edges are replaced by their rank in the (weight, index) order, which makes
    every weight distinct and positive, and the sparse MST routine does the rest.
    """
    n = env.n
    if isinstance(env, LowWeightEnvironment):
        idx, omega = env.edges, env.omega
    else:
        idx, omega = np.arange(env.omega.size, dtype=np.int64), env.omega
    if n == 1:
        return SpanningTree(1, (), ((),))
    order = np.lexsort((idx, omega))
    rank = np.empty(idx.size, dtype=np.float64)
    rank[order] = np.arange(1, idx.size + 1)
    us, vs = edge_endpoints(idx, n)
    graph = coo_matrix((rank, (np.atleast_1d(us), np.atleast_1d(vs))), shape=(n, n)).tocsr()
    tree = minimum_spanning_tree(graph).tocoo()
    if tree.nnz != n - 1:
        raise InfeasibleError(f"edges with weight <= {getattr(env, 'p_max', 1.0)} do not connect the graph")
    chosen = order[tree.data.astype(np.int64) - 1]
    return SpanningTree._trusted(n, idx[chosen])


def mst_max_degree(tree: SpanningTree) -> int:
    return int(tree.degrees().max())


class TreeSampler:
    """Reusable exact sampler for one network (the setup cost is paid once).

    ``method`` selects the walk engine: ``"auto"``, ``"wilson"`` or ``"hierarchical"``.
    """

    def __init__(self, net: WeightedNetwork, method: str = "auto"):
        if not net.is_connected():
            raise InfeasibleError("network is disconnected")
        self.net = net
        self._engine = UstSampler(net.log_weights, method=method)

    @property
    def method(self) -> str:
        return self._engine.method

    def sample(self, rng) -> SpanningTree:
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        return SpanningTree.from_edges(self.net.k, self._engine.sample_edges(rng))

    def sample_many(self, count: int, rng) -> list[SpanningTree]:
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        return [self.sample(rng) for _ in range(count)]


def wilson_sample(net: WeightedNetwork, rng_seed) -> SpanningTree:
    """One draw from the weighted spanning tree measure of ``net``."""
    return TreeSampler(net).sample(rng_seed)
