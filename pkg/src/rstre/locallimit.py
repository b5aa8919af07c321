"""Rooted balls, canonical rooted-tree codes and the local-limit reference laws.

A rooted tree is encoded by nested parentheses: a vertex is ``"("`` followed
by the sorted codes of its children and ``")"``.  The single vertex is
``"()"`` and a root with two leaves is ``"(()())"``.  Two rooted trees share a
code exactly when a root-preserving isomorphism exists.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from math import exp, factorial

import numpy as np

from .electrical import build_network
from .env import Environment
from .spanning import SpanningTree, TreeSampler, kruskal_mst

__all__ = [
    "RootedBall",
    "BallHistogram",
    "canonical_code",
    "parse_code",
    "ball",
    "ball_edges",
    "sample_poisson_survive",
    "poisson_survive_histogram",
    "poisson_survive_law_r1",
    "empirical_ball_distribution",
    "tv_distance",
    "count_tree_maps",
    "mean_tree_moment",
    "poisson_survive_host",
    "poisson_survive_moment",
    "ball_agreement_rate",
    "rooted_trees_up_to",
]

LEAF = "()"


@dataclass(frozen=True)
class RootedBall:
    radius: int
    code: str
    vertex_count: int


@dataclass
class BallHistogram:
    """Counts (or probabilities) of canonical codes at a fixed radius."""

    radius: int
    counts: dict = field(default_factory=dict)
    total: float = 0

    def add(self, code: str, weight=1) -> None:
        self.counts[code] = self.counts.get(code, 0) + weight
        self.total += weight

    def merge(self, other: "BallHistogram") -> "BallHistogram":
        if other.radius != self.radius:
            raise ValueError("cannot merge histograms of different radii")
        out = BallHistogram(self.radius, dict(self.counts), self.total)
        for code, c in other.counts.items():
            out.add(code, c)
        return out

    def frequencies(self) -> dict:
        if self.total <= 0:
            raise ValueError("empty histogram")
        return {c: v / self.total for c, v in self.counts.items()}


def _as_adjacency(tree):
    if isinstance(tree, SpanningTree):
        return tree.adjacency
    return tree


def canonical_code(adjacency, root: int, max_depth: int | None = None) -> str:
    """Code of the tree reachable from ``root``, truncated below ``max_depth``.

    ``adjacency`` maps each vertex to its neighbors (a sequence or a dict).
    Raises ``ValueError`` if a cycle is reachable within the explored region.
    """
    adjacency = _as_adjacency(adjacency)
    parent = {root: None}
    depth = {root: 0}
    order = [root]
    queue = deque([root])
    while queue:
        x = queue.popleft()
        if max_depth is not None and depth[x] >= max_depth:
            continue
        for y in adjacency[x]:
            if y == parent[x]:
                continue
            if y in parent:
                raise ValueError("input is not a tree: cycle detected")
            parent[y] = x
            depth[y] = depth[x] + 1
            order.append(y)
            queue.append(y)
    kids = {x: [] for x in order}
    for x in reversed(order):
        kids[x].sort()
        code = "(" + "".join(kids[x]) + ")"
        if parent[x] is None:
            return code
        kids[parent[x]].append(code)
    raise AssertionError("unreachable")


def parse_code(code: str):
    """Adjacency lists (root = vertex 0) of the rooted tree with the given code."""
    adj = []
    stack = []
    for i, ch in enumerate(code):
        if ch == "(":
            v = len(adj)
            adj.append([])
            if stack:
                adj[stack[-1]].append(v)
                adj[v].append(stack[-1])
            elif v:
                raise ValueError(f"more than one root in code at position {i}")
            stack.append(v)
        elif ch == ")":
            if not stack:
                raise ValueError(f"unbalanced code at position {i}")
            stack.pop()
        else:
            raise ValueError(f"unexpected character {ch!r} at position {i}")
    if stack or not adj:
        raise ValueError("unbalanced or empty code")
    return adj


def ball(tree, v: int, r: int) -> RootedBall:
    """The radius-``r`` ball of ``tree`` around ``v``, up to root-preserving isomorphism."""
    if r < 0:
        raise ValueError("radius must be non-negative")
    code = canonical_code(tree, v, r)
    return RootedBall(r, code, code.count("("))


def ball_edges(tree, v: int, r: int) -> frozenset:
    """Edges of ``tree`` with both ends within distance ``r`` of ``v``, as sorted pairs."""
    adjacency = _as_adjacency(tree)
    seen = {v: 0}
    queue = deque([v])
    out = set()
    while queue:
        x = queue.popleft()
        if seen[x] >= r:
            continue
        for y in adjacency[x]:
            if y not in seen:
                seen[y] = seen[x] + 1
                queue.append(y)
                out.add((min(x, y), max(x, y)))
    return frozenset(out)


def _gw_code(rng, height: int) -> str:
    """Poisson(1) Galton-Watson tree cut at ``height`` generations below its root."""
    if height <= 0:
        return LEAF
    kids = sorted(_gw_code(rng, height - 1) for _ in range(rng.poisson(1.0)))
    return "(" + "".join(kids) + ")"


def sample_poisson_survive(r: int, seed) -> RootedBall:
    """Radius-``r`` ball of Poisson(1) conditioned to survive, around its root.

    A backbone ``x_0, ..., x_r`` is laid down and every backbone vertex at depth
    ``d < r`` gets Poisson(1) further children, each the root of an
    independent Poisson(1) tree cut at depth ``r``.
    """
    if r < 0:
        raise ValueError("radius must be non-negative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    code = LEAF
    for d in range(r - 1, -1, -1):
        kids = [code] + [_gw_code(rng, r - d - 1) for _ in range(rng.poisson(1.0))]
        code = "(" + "".join(sorted(kids)) + ")"
    return RootedBall(r, code, code.count("("))


def poisson_survive_histogram(r: int, reps: int, seed) -> BallHistogram:
    rng = np.random.default_rng(seed)
    h = BallHistogram(r)
    for _ in range(reps):
        h.add(sample_poisson_survive(r, rng).code)
    return h


def poisson_survive_law_r1(max_degree: int = 30) -> BallHistogram:
    """Exact radius-1 law: the root has ``1 + Poisson(1)`` children."""
    h = BallHistogram(1)
    for k in range(1, max_degree + 1):
        h.add("(" + LEAF * k + ")", exp(-1.0) / factorial(k - 1))
    return h


def _sample_fn(sampler):
    if hasattr(sampler, "sample"):
        return sampler.sample
    if callable(sampler):
        return sampler
    raise TypeError("sampler must be callable or have a .sample(rng) method")


def empirical_ball_distribution(sampler, v: int, r: int, reps: int, seed) -> BallHistogram:
    """Histogram of ball codes around ``v`` over ``reps`` sampled trees."""
    if reps < 1:
        raise ValueError("reps must be at least 1")
    draw = _sample_fn(sampler)
    rng = np.random.default_rng(seed)
    h = BallHistogram(r)
    for _ in range(reps):
        h.add(ball(draw(rng), v, r).code)
    return h


def tv_distance(h1: BallHistogram, h2: BallHistogram) -> float:
    if h1.radius != h2.radius:
        raise ValueError(f"radius mismatch: {h1.radius} vs {h2.radius}")
    p, q = h1.frequencies(), h2.frequencies()
    return 0.5 * sum(abs(p.get(c, 0.0) - q.get(c, 0.0)) for c in set(p) | set(q))


def _as_rooted(t):
    if isinstance(t, str):
        return parse_code(t), 0
    return t


def count_tree_maps(host, host_root: int, t) -> int:
    """Number of injective maps of rooted tree ``t`` into ``host`` that fix the root and keep adjacency.

    ``t`` is a canonical code or an ``(adjacency, root)`` pair; ``host`` is any
    adjacency structure (a :class:`SpanningTree` works).
    """
    host = _as_adjacency(host)
    t_adj, t_root = _as_rooted(t)
    # vertices of t in BFS order with their parents
    order, par = [t_root], {t_root: None}
    for x in order:
        for y in t_adj[x]:
            if y not in par:
                par[y] = x
                order.append(y)
    if len(order) != len(t_adj):
        raise ValueError("pattern tree is not connected")
    image = {t_root: host_root}
    used = {host_root}

    def extend(i: int) -> int:
        if i == len(order):
            return 1
        x = order[i]
        total = 0
        for y in host[image[par[x]]]:
            if y in used:
                continue
            image[x] = y
            used.add(y)
            total += extend(i + 1)
            used.discard(y)
        return total

    return extend(1)


def poisson_survive_host(radius: int):
    """A sampler of ``(adjacency, root)`` hosts from the Poisson(1)-survive ball of ``radius``."""

    def draw(rng):
        return parse_code(sample_poisson_survive(radius, rng).code), 0

    return draw


# exact E N(P, t) for the small trees: a root of degree 1 + Poisson(1) whose
# backbone child has 1 + Poisson(1) children and other children Poisson(1)
_EXACT_MOMENTS = {"()": 1.0, "(())": 2.0, "(()())": 3.0, "((()))": 3.0}


def poisson_survive_moment(t, reps: int = 200_000, seed=0) -> float:
    """Mean of ``count_tree_maps`` over the Poisson(1)-survive tree.

    Exact for trees with at most three vertices, Monte Carlo otherwise.
    """
    code = t if isinstance(t, str) else canonical_code(*t)
    if code in _EXACT_MOMENTS:
        return _EXACT_MOMENTS[code]
    return mean_tree_moment(poisson_survive_host(_code_depth(code)), code, reps, seed)


def _code_depth(code: str) -> int:
    depth = best = 0
    for ch in code:
        depth += 1 if ch == "(" else -1
        best = max(best, depth)
    return best - 1


def mean_tree_moment(sampler, t, reps: int, seed, v: int = 0) -> float:
    """Monte-Carlo mean of ``count_tree_maps`` over sampled trees rooted at ``v``.

    ``sampler`` yields :class:`SpanningTree` objects (rooted at ``v``) or
    ``(adjacency, root)`` pairs.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    draw = _sample_fn(sampler)
    rng = np.random.default_rng(seed)
    total = 0
    for _ in range(reps):
        host = draw(rng)
        if isinstance(host, tuple):
            total += count_tree_maps(host[0], host[1], t)
        else:
            total += count_tree_maps(host, v, t)
    return total / reps


def ball_agreement_rate(env: Environment, beta: float, r: int, reps: int, seed, v: int = 0,
                        sampler: TreeSampler | None = None) -> float:
    """Fraction of sampled trees whose radius-``r`` ball at ``v`` equals the MST's, edge for edge."""
    if reps < 1:
        raise ValueError("reps must be at least 1")
    target = ball_edges(kruskal_mst(env), v, r)
    sampler = sampler or TreeSampler(build_network(env, beta))
    rng = np.random.default_rng(seed)
    hits = sum(ball_edges(sampler.sample(rng), v, r) == target for _ in range(reps))
    return hits / reps


def rooted_trees_up_to(k: int) -> list[str]:
    """Codes of all rooted unlabeled trees with at most ``k`` vertices."""
    by_size = {1: {LEAF}}
    for size in range(2, k + 1):
        found = set()
        # attach a multiset of subtrees whose sizes sum to size - 1
        for parts in _partitions(size - 1):
            for combo in _multiset_choices(parts, by_size):
                found.add("(" + "".join(sorted(combo)) + ")")
        by_size[size] = found
    return sorted(c for s in range(1, k + 1) for c in by_size[s])


def _partitions(n: int, largest: int | None = None):
    largest = n if largest is None else largest
    if n == 0:
        yield []
        return
    for first in range(min(n, largest), 0, -1):
        for rest in _partitions(n - first, first):
            yield [first] + rest


def _multiset_choices(parts, by_size):
    if not parts:
        yield []
        return
    head, rest = parts[0], parts[1:]
    for code in by_size[head]:
        for tail in _multiset_choices(rest, by_size):
            yield [code] + tail

