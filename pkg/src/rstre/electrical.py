"""Electrical-network computations on networks with conductances exp(-beta * omega).

Conductances are stored as a dense matrix of log-conductances; absent edges
(and the diagonal) hold ``-inf``.  Before anything is exponentiated the matrix
is shifted so that its largest entry is 0.  Tree probabilities are invariant
under that global rescaling, and resistances are rescaled back on output.

Edges are given as vertex pairs.  An edge ``(a, b)`` passed to a function that
takes an *oriented* edge is oriented from ``a`` to ``b``; elsewhere edges are
oriented from the smaller to the larger vertex id.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
from scipy.special import logsumexp

from .env import Environment, component_labels

__all__ = [
    "ConditioningError",
    "InfeasibleError",
    "WeightedNetwork",
    "LaplacianSolver",
    "Flow",
    "MAX_LOG_DYNAMIC_RANGE",
    "build_network",
    "network_from_log_weights",
    "contract",
    "merge_vertices",
    "effective_resistance",
    "pairwise_resistances",
    "unit_current_flow",
    "flow_energy",
    "transfer_impedance",
    "transfer_impedance_matrix",
    "edges_in_tree_prob",
    "edge_in_tree_probs",
    "y_offdiagonal_identity_check",
    "nash_williams_lower_bound",
    "series_parallel_lower_bound",
]

# Exact solves are refused when conductances span more than 1e30.
MAX_LOG_DYNAMIC_RANGE = float(np.log(1e30))
PROB_SLACK = 1e-9


class ConditioningError(ArithmeticError):
    """Conductances span too many orders of magnitude for a dense solve."""


class InfeasibleError(ValueError):
    """The network is disconnected (or otherwise has no unit flow)."""


@dataclass(frozen=True, eq=False)
class WeightedNetwork:
    """Undirected network on ``k`` vertex classes with log-conductances.

    ``classes[i]`` lists the original vertices merged into class ``i``.
    Parallel edges between two classes are merged into a single conductance.
    """

    log_weights: np.ndarray = field(repr=False)
    classes: tuple
    beta: float

    def __post_init__(self):
        self.log_weights.setflags(write=False)

    @property
    def k(self) -> int:
        return self.log_weights.shape[0]

    @property
    def n(self) -> int:
        return sum(len(c) for c in self.classes)

    def log_weight(self, u: int, v: int) -> float:
        return float(self.log_weights[u, v])

    def weight(self, u: int, v: int) -> float:
        return float(np.exp(self.log_weights[u, v]))

    def has_edge(self, u: int, v: int) -> bool:
        return u != v and np.isfinite(self.log_weights[u, v])

    def edge_list(self) -> list[tuple[int, int]]:
        iu, iv = np.triu_indices(self.k, 1)
        keep = np.isfinite(self.log_weights[iu, iv])
        return list(zip(iu[keep].tolist(), iv[keep].tolist()))

    def is_connected(self) -> bool:
        iu, iv = np.nonzero(np.isfinite(self.log_weights))
        return np.unique(component_labels(self.k, iu, iv)).size == 1

    def log_dynamic_range(self) -> float:
        finite = self.log_weights[np.isfinite(self.log_weights)]
        if finite.size == 0:
            return 0.0
        return float(finite.max() - finite.min())

    @cached_property
    def solver(self) -> "LaplacianSolver":
        return LaplacianSolver(self)


def network_from_log_weights(log_weights, beta: float = 0.0, classes=None) -> WeightedNetwork:
    """Network from a symmetric log-conductance matrix (``-inf`` = no edge)."""
    lw = np.array(log_weights, dtype=np.float64)
    if lw.ndim != 2 or lw.shape[0] != lw.shape[1]:
        raise ValueError("log_weights must be a square matrix")
    if not np.allclose(np.nan_to_num(lw, neginf=-1e300), np.nan_to_num(lw.T, neginf=-1e300)):
        raise ValueError("log_weights must be symmetric")
    if np.any(np.isnan(lw)) or np.any(lw == np.inf):
        raise ValueError("log-conductances must be finite or -inf")
    np.fill_diagonal(lw, -np.inf)
    if classes is None:
        classes = tuple((i,) for i in range(lw.shape[0]))
    return WeightedNetwork(lw, tuple(tuple(c) for c in classes), float(beta))


def build_network(env: Environment, beta: float) -> WeightedNetwork:
    """Complete graph with conductance ``exp(-beta * omega_e)`` on every edge."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    n = env.n
    lw = np.empty((n, n))
    iu, iv = np.triu_indices(n, 1)
    lw[iu, iv] = -beta * env.omega
    lw[iv, iu] = lw[iu, iv]
    np.fill_diagonal(lw, -np.inf)
    return WeightedNetwork(lw, tuple((i,) for i in range(n)), float(beta))


def merge_vertices(net: WeightedNetwork, groups) -> WeightedNetwork:
    """Merge each group of vertices into one vertex; other vertices keep their order.

    Merged vertices come first, in the order of ``groups``.  Internal edges
    become self-loops and are dropped; parallel edges add conductances.
    """
    k = net.k
    label = np.full(k, -1)
    for g, members in enumerate(groups):
        members = list(members)
        if not members:
            raise ValueError("cannot merge an empty vertex set")
        if np.any(label[members] >= 0):
            raise ValueError("vertex groups must be disjoint")
        label[members] = g
    rest = np.flatnonzero(label < 0)
    label[rest] = len(groups) + np.arange(rest.size)
    m = len(groups) + rest.size
    order = np.argsort(label, kind="stable")
    starts = np.flatnonzero(np.r_[True, np.diff(label[order]) != 0])
    lw = net.log_weights[np.ix_(order, order)]
    with np.errstate(invalid="ignore"):
        lw = np.logaddexp.reduceat(lw, starts, axis=0)
        lw = np.logaddexp.reduceat(lw, starts, axis=1)
    np.fill_diagonal(lw, -np.inf)
    classes = []
    for g in range(m):
        members = np.flatnonzero(label == g)
        classes.append(tuple(sorted(x for i in members for x in net.classes[i])))
    return WeightedNetwork(lw, tuple(classes), net.beta)


def contract(net: WeightedNetwork, f) -> WeightedNetwork:
    """Contract edge ``f = (a, b)``: merge its endpoint classes (merged class first)."""
    a, b = f
    if a == b:
        raise ValueError("edge is internal to one class")
    if not net.has_edge(a, b):
        raise ValueError(f"({a}, {b}) is not an edge of the network")
    return merge_vertices(net, [(a, b)])


class LaplacianSolver:
    """Grounded Cholesky factorization of the (gauge-shifted) weighted Laplacian."""

    def __init__(self, net: WeightedNetwork):
        if net.k < 2:
            raise InfeasibleError("need at least two vertices")
        if not net.is_connected():
            raise InfeasibleError("network is disconnected")
        spread = net.log_dynamic_range()
        if spread > MAX_LOG_DYNAMIC_RANGE:
            raise ConditioningError(
                f"conductances span e^{spread:.1f} > 1e30; use the sampler instead"
            )
        self.net = net
        self.shift = float(np.max(net.log_weights))
        w = np.exp(net.log_weights - self.shift)
        self.w = w
        lap = -w
        np.fill_diagonal(lap, w.sum(axis=1))
        self.laplacian = lap
        # ground the last vertex
        self._chol = sla.cho_factor(lap[:-1, :-1], lower=True)

    def solve(self, b) -> np.ndarray:
        """Potentials ``x`` (with ``x[-1] = 0``) solving ``L x = b`` for zero-sum ``b``.

        Potentials refer to the true (unshifted) conductances.
        """
        b = np.asarray(b, dtype=np.float64)
        if abs(b.sum()) > 1e-9 * max(1.0, np.abs(b).sum()):
            raise ValueError("right-hand side must sum to zero")
        x = np.zeros(self.net.k)
        x[:-1] = sla.cho_solve(self._chol, b[:-1])
        return x * np.exp(-self.shift)

    @cached_property
    def pinv_shifted(self) -> np.ndarray:
        """Pseudoinverse of the gauge-shifted Laplacian (pairs with ``self.w``)."""
        k = self.net.k
        j = np.full((k, k), 1.0 / k)
        return np.linalg.inv(self.laplacian + j) - j

    @property
    def pinv(self) -> np.ndarray:
        """Moore-Penrose pseudoinverse of the true Laplacian."""
        return self.pinv_shifted * np.exp(-self.shift)

    def resistance(self, u: int, v: int) -> float:
        if u == v:
            return 0.0
        b = np.zeros(self.net.k)
        b[u], b[v] = 1.0, -1.0
        x = self.solve(b)
        return float(x[u] - x[v])


@dataclass(frozen=True, eq=False)
class Flow:
    """Antisymmetric edge function as a dense matrix, ``theta[x, y]`` from x to y."""

    theta: np.ndarray = field(repr=False)
    sources: frozenset
    sinks: frozenset

    def __call__(self, x: int, y: int) -> float:
        return float(self.theta[x, y])

    def net_outflow(self) -> np.ndarray:
        return self.theta.sum(axis=1)


def _check_vertex_sets(net, A, B):
    A, B = {int(a) for a in A}, {int(b) for b in B}
    if not A or not B:
        raise ValueError("vertex sets must be non-empty")
    if A & B:
        raise ValueError("vertex sets must be disjoint")
    if min(A | B) < 0 or max(A | B) >= net.k:
        raise ValueError("vertex out of range")
    return A, B


def effective_resistance(net: WeightedNetwork, A, B) -> float:
    """Effective resistance between vertex sets ``A`` and ``B`` (ints are singletons)."""
    A = [A] if np.isscalar(A) else A
    B = [B] if np.isscalar(B) else B
    A, B = _check_vertex_sets(net, A, B)
    if len(A) == 1 and len(B) == 1:
        return net.solver.resistance(next(iter(A)), next(iter(B)))
    merged = merge_vertices(net, [sorted(A), sorted(B)])
    return merged.solver.resistance(0, 1)


def _shifted_resistances(net: WeightedNetwork) -> np.ndarray:
    m = net.solver.pinv_shifted
    d = np.diag(m)
    r = d[:, None] + d[None, :] - 2.0 * m
    r = 0.5 * (r + r.T)
    np.fill_diagonal(r, 0.0)
    return r


def pairwise_resistances(net: WeightedNetwork) -> np.ndarray:
    """All effective resistances ``R[u, v] = M_uu + M_vv - 2 M_uv``."""
    return _shifted_resistances(net) * np.exp(-net.solver.shift)


def unit_current_flow(net: WeightedNetwork, e) -> Flow:
    """The unit current flow from ``e[0]`` to ``e[1]``."""
    a, b = int(e[0]), int(e[1])
    if a == b:
        raise ValueError("source and sink coincide")
    rhs = np.zeros(net.k)
    rhs[a], rhs[b] = 1.0, -1.0
    solver = net.solver
    volt = solver.solve(rhs) * np.exp(solver.shift)
    volt = volt - volt[b]
    theta = solver.w * (volt[:, None] - volt[None, :])
    theta = 0.5 * (theta - theta.T)
    return Flow(theta, frozenset([a]), frozenset([b]))


def flow_energy(net: WeightedNetwork, theta) -> float:
    """Energy ``1/2 * sum over oriented edges of theta^2 / w``."""
    t = theta.theta if isinstance(theta, Flow) else np.asarray(theta, dtype=np.float64)
    if t.shape != (net.k, net.k):
        raise ValueError("flow does not match the network")
    present = np.isfinite(net.log_weights)
    if np.any(t[~present] != 0.0):
        raise ValueError("flow uses a pair that is not an edge")
    return float(0.5 * np.sum(t[present] ** 2 * np.exp(-net.log_weights[present])))


def transfer_impedance(net: WeightedNetwork, e, f) -> float:
    """``Y(e, f)``: current through oriented ``f`` under unit current across oriented ``e``."""
    (a, b), (c, d) = e, f
    if not (net.has_edge(a, b) and net.has_edge(c, d)):
        raise ValueError("both arguments must be edges of the network")
    solver = net.solver
    m = solver.pinv_shifted
    dv = m[c, a] - m[c, b] - m[d, a] + m[d, b]
    return float(solver.w[c, d] * dv)


def transfer_impedance_matrix(net: WeightedNetwork, edges) -> np.ndarray:
    """Matrix ``Y(e_i, e_j)`` for a list of oriented edges."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    for a, b in edges:
        if not net.has_edge(a, b):
            raise ValueError(f"({a}, {b}) is not an edge of the network")
    solver = net.solver
    m = solver.pinv_shifted
    a, b = edges[:, 0], edges[:, 1]
    # entry [i, j] = w(e_j) * (v_{e_i}(e_j^-) - v_{e_i}(e_j^+))
    dv = m[np.ix_(a, a)] - m[np.ix_(b, a)] - m[np.ix_(a, b)] + m[np.ix_(b, b)]
    return dv * solver.w[a, b][None, :]


def _canonical(edges):
    out = []
    for u, v in edges:
        u, v = int(u), int(v)
        out.append((u, v) if u < v else (v, u))
    return out


def edges_in_tree_prob(net: WeightedNetwork, edges) -> float:
    """Probability that all given distinct edges lie in the weighted spanning tree."""
    edges = _canonical(edges)
    if not edges:
        raise ValueError("need at least one edge")
    if len(set(edges)) != len(edges):
        raise ValueError("edges must be distinct")
    y = transfer_impedance_matrix(net, edges)
    p = float(np.linalg.det(y))
    if not -PROB_SLACK <= p <= 1.0 + PROB_SLACK:
        raise ConditioningError(f"determinant {p!r} is not a probability")
    return min(1.0, max(0.0, p))


def edge_in_tree_probs(net: WeightedNetwork) -> np.ndarray:
    """Matrix of single-edge probabilities ``w(u, v) R(u, v)`` (zero diagonal)."""
    p = net.solver.w * _shifted_resistances(net)
    np.fill_diagonal(p, 0.0)
    return p


def y_offdiagonal_identity_check(net: WeightedNetwork, e, f) -> float:
    """Residual of ``Y(e,f)^2 w(e)/w(f) = P(e)P(f) - P(e,f)``."""
    e, f = _canonical([e, f])
    if e == f:
        raise ValueError("edges must differ")
    y = transfer_impedance(net, e, f)
    pe = edges_in_tree_prob(net, [e])
    pf = edges_in_tree_prob(net, [f])
    pef = edges_in_tree_prob(net, [e, f])
    ratio = np.exp(net.log_weights[e] - net.log_weights[f])
    return float(abs(y * y * ratio - (pe * pf - pef)))


def nash_williams_lower_bound(net: WeightedNetwork, e, cutset) -> float:
    """Lower bound ``w(e) / sum_{f in cutset} w(f)`` on ``P(e in tree)``."""
    (a, b), = _canonical([e])
    cut = set(_canonical(cutset))
    if (a, b) not in cut:
        raise ValueError("cutset must contain e")
    for u, v in cut:
        if not net.has_edge(u, v):
            raise ValueError(f"({u}, {v}) is not an edge of the network")
    present = np.isfinite(net.log_weights)
    for u, v in cut:
        present[u, v] = present[v, u] = False
    iu, iv = np.nonzero(present)
    labels = component_labels(net.k, iu, iv)
    if labels[a] == labels[b]:
        raise ValueError("cutset does not separate the endpoints of e")
    lw = np.array([net.log_weights[u, v] for u, v in cut])
    return float(np.exp(net.log_weights[a, b] - logsumexp(lw)))


def series_parallel_lower_bound(net: WeightedNetwork, u: int, v: int) -> float:
    """Resistance between u and v once every other vertex is shorted together.

    Rayleigh monotonicity makes this a lower bound on ``R(u, v)``.
    """
    lw = net.log_weights[[u, v]]
    shift = np.max(lw[np.isfinite(lw)])
    w = np.exp(lw - shift)
    others = np.ones(net.k, dtype=bool)
    others[[u, v]] = False
    su, sv = w[0, others].sum(), w[1, others].sum()
    around = 0.0 if su == 0.0 or sv == 0.0 else 1.0 / (1.0 / su + 1.0 / sv)
    return float(np.exp(-shift) / (w[0, v] + around))
