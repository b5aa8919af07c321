"""Weighted uniform spanning tree sampler that stays fast when conductances
span hundreds of orders of magnitude.

Plain Wilson (loop-erased random walks towards a growing tree) is exact but a
walk can sit inside a tight cluster for ``exp(beta * gap)`` steps.  Two devices
remove those waits:

* Cluster factorization.  If ``S`` is a cluster of the maximum-conductance
  spanning tree, then conditionally on ``T`` restricting to a spanning tree of
  ``S`` the tree splits into independent trees of ``G[S]`` and ``G/S``.  The
  conditioning event fails with probability at most
  ``sum_{g in MST(S)} 1/w(g) * sum_{f in cut(S)} w(f)`` (exchange argument),
  so clusters where this bound is below ``eps`` are sampled independently.
* Laplacian-walk steps.  Inside the remaining quotient graphs, walks that
  would be trapped are replaced by the loop-erased walk's own Markov
  description: from the tip, step to ``y`` with probability proportional to
  ``w(tip, y) * P_y(hit target before the current path)``.  Hitting
  probabilities come from a subtraction-free (GTH) elimination, so they are
  accurate whatever the conditioning.

The total-variation error of a draw is at most ``eps`` times the number of
factorized clusters; everything else is exact.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.special import logsumexp

from .env import UnionFind

PLAIN_SPREAD = 8.0      # log-range of MST conductances below which plain Wilson is used
LOG_EPS = float(np.log(1e-15))
LRW_MAX = 40            # quotients up to this size use Laplacian-walk steps throughout
TRAP_MAX = 24


@njit(cache=True)
def _hit_probs(p_int, p_target, p_kill):
    """Probability of reaching the target before the killing set from each interior state.

    ``p_int`` holds transition weights between interior states (diagonal
    ignored); rows need not be normalized.
    """
    m = p_int.shape[0]
    a = p_int.copy()
    t = p_target.copy()
    k = p_kill.copy()
    for i in range(m):
        s = t[i] + k[i]
        for j in range(i + 1, m):
            s += a[i, j]
        if s <= 0.0:
            raise FloatingPointError("isolated state in hitting-probability solve")
        t[i] /= s
        k[i] /= s
        for j in range(i + 1, m):
            a[i, j] /= s
        for r in range(i + 1, m):
            c = a[r, i]
            if c == 0.0:
                continue
            for j in range(i + 1, m):
                a[r, j] += c * a[i, j]
            t[r] += c * t[i]
            k[r] += c * k[i]
    h = np.empty(m)
    for i in range(m - 1, -1, -1):
        acc = t[i]
        for j in range(i + 1, m):
            acc += a[i, j] * h[j]
        h[i] = acc
    return h


def _row_normalize(log_rows):
    """Row-stochastic weights from log-weights, one max-shift per row."""
    with np.errstate(invalid="ignore"):
        shift = np.max(log_rows, axis=1, keepdims=True)
    shift[~np.isfinite(shift)] = 0.0
    return np.exp(log_rows - shift)


@njit(cache=True)
def _draw(cum, total):
    """Index of the first cumulative weight exceeding a uniform draw on [0, total)."""
    u = np.random.random() * total
    lo, hi = 0, cum.size - 1
    while lo < hi:
        mid = (lo + hi) >> 1
        if cum[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True)
def _trap_walk(x, t, tptr, tmem, poff, pin, pout, cdf, loc, in_tree, pos, seg):
    """Loop-erased walk from ``x`` inside trap ``t`` via Laplacian-walk steps.

    Writes the erased path after ``x`` into ``seg`` and returns its length.
    Only the last vertex can lie outside the trap, in the tree or on the
    current path.
    """
    a = tptr[t]
    m = tptr[t + 1] - a
    P = pin[poff[t]:poff[t] + m * m].reshape((m, m))
    state = np.zeros(m, np.int8)  # 0 free, 1 absorbing, 2 on the erased path
    for i in range(m):
        v = tmem[a + i]
        if in_tree[v] or (pos[v] >= 0 and v != x):
            state[i] = 1
    tip = loc[x]
    state[tip] = 2
    idx = np.empty(m, np.int64)
    cum = np.empty(m + 1)
    h = np.empty(0)
    nseg = 0
    while True:
        mi = 0
        for i in range(m):
            if state[i] == 0:
                idx[mi] = i
                mi += 1
        if mi > 0:
            sub = np.empty((mi, mi))
            pt = np.empty(mi)
            pk = np.empty(mi)
            for r in range(mi):
                ir = idx[r]
                tt = pout[a + ir]
                kk = 0.0
                for j in range(m):
                    if state[j] == 1:
                        tt += P[ir, j]
                    elif state[j] == 2:
                        kk += P[ir, j]
                pt[r] = tt
                pk[r] = kk
                for c in range(mi):
                    sub[r, c] = P[ir, idx[c]]
            h = _hit_probs(sub, pt, pk)
        total = 0.0
        r = 0
        for i in range(m):
            if state[i] == 0:
                total += P[tip, i] * h[r]
                r += 1
            elif state[i] == 1:
                total += P[tip, i]
            cum[i] = total
        total += pout[a + tip]
        cum[m] = total
        if not total > 0.0:
            raise FloatingPointError("no admissible transition")
        j = _draw(cum, total)
        if j < m:
            seg[nseg] = tmem[a + j]
            nseg += 1
            if state[j] == 1:
                return nseg
            state[j] = 2
            tip = j
        else:
            y = tmem[a + tip]
            row = cdf[y]
            seg[nseg] = _draw(row, row[row.size - 1])
            return nseg + 1


@njit(cache=True)
def _wilson(root, order, cdf, trap_of, loc, tptr, tmem, poff, pin, pout, seed):
    """Wilson's algorithm with macro-steps through traps; returns parent pointers."""
    np.random.seed(seed)
    k = trap_of.size
    parent = np.full(k, -1, np.int64)
    in_tree = np.zeros(k, np.bool_)
    in_tree[root] = True
    pos = np.full(k, -1, np.int64)
    path = np.empty(k, np.int64)
    seg = np.empty(k + 1, np.int64)
    for s in order:
        if in_tree[s]:
            continue
        plen = 1
        path[0] = s
        pos[s] = 0
        cur = s
        while True:
            t = trap_of[cur]
            if t >= 0:
                nseg = _trap_walk(cur, t, tptr, tmem, poff, pin, pout, cdf, loc, in_tree, pos, seg)
            else:
                seg[0] = _draw(cdf[cur], cdf[cur, k - 1])
                nseg = 1
            for i in range(nseg - 1):
                y = seg[i]
                pos[y] = plen
                path[plen] = y
                plen += 1
            y = seg[nseg - 1]
            if in_tree[y]:
                for i in range(plen):
                    v = path[i]
                    in_tree[v] = True
                    pos[v] = -1
                    parent[v] = path[i + 1] if i + 1 < plen else y
                break
            if pos[y] >= 0:
                cut = pos[y] + 1
                for i in range(cut, plen):
                    pos[path[i]] = -1
                plen = cut
            else:
                pos[y] = plen
                path[plen] = y
                plen += 1
            cur = path[plen - 1]
    return parent


class _Dendrogram:
    """Merge tree of the maximum-conductance spanning tree (Kruskal, strongest first)."""

    def __init__(self, log_w):
        k = log_w.shape[0]
        self.k = k
        iu, iv = np.triu_indices(k, 1)
        vals = log_w[iu, iv]
        order = np.argsort(-vals, kind="stable")
        uf = UnionFind(k)
        node_of = list(range(k))
        self.children, self.level, self.parent = {}, {}, {}
        self.size = [1] * k
        nxt = k
        for a, b, lv in zip(iu[order].tolist(), iv[order].tolist(), vals[order].tolist()):
            ra, rb = uf.find(a), uf.find(b)
            if ra == rb:
                continue
            na, nb = node_of[ra], node_of[rb]
            self.parent[na] = self.parent[nb] = nxt
            self.children[nxt] = (na, nb)
            self.level[nxt] = lv
            self.size.append(self.size[na] + self.size[nb])
            uf.union(ra, rb)
            node_of[uf.find(ra)] = nxt
            nxt += 1
            if uf.count == 1:
                break
        if uf.count != 1:
            raise ValueError("network is disconnected")
        self.root = nxt - 1

    def leaves(self, node):
        out, stack = [], [node]
        while stack:
            x = stack.pop()
            if x < self.k:
                out.append(x)
            else:
                stack.extend(self.children[x])
        return np.array(sorted(out), dtype=np.int64)

    def core(self) -> int:
        """A vertex reached by always entering the larger child: the bottom of the main basin."""
        x = self.root
        while x >= self.k:
            a, b = self.children[x]
            x = a if self.size[a] >= self.size[b] else b
        return x

    def dfs_order(self, first: int) -> list:
        """Leaves depth-first, entering the branch holding ``first`` before its sibling."""
        holds = set()
        x = first
        while x in self.parent:
            x = self.parent[x]
            holds.add(x)
        holds.add(first)
        out, stack = [], [self.root]
        while stack:
            x = stack.pop()
            if x < self.k:
                out.append(x)
                continue
            a, b = self.children[x]
            if b in holds:
                a, b = b, a
            stack.append(b)
            stack.append(a)
        return out

    def spread(self) -> float:
        if not self.level:
            return 0.0
        lv = np.array(list(self.level.values()))
        return float(lv.max() - lv.min())

    def traps(self, max_size: int) -> list:
        """Maximal clusters with at most ``max_size`` vertices (singletons excluded)."""
        out, stack = [], [self.root]
        while stack:
            x = stack.pop()
            if x < self.k:
                continue
            if self.size[x] <= max_size:
                out.append(self.leaves(x))
            else:
                stack.extend(self.children[x])
        return out


class _QuotientSampler:
    """Wilson's algorithm on a dense graph of moderate size, with traps.

    ``root=None`` roots at the core of the merge tree; the walk engine is
    exact for any root.
    """

    def __init__(self, qlog, lrw_max=LRW_MAX, trap_max=TRAP_MAX, plain_spread=PLAIN_SPREAD,
                 root=None):
        k = qlog.shape[0]
        self.k = k
        if k <= 2:
            self.root = 0
            return
        groups = []
        order = np.arange(k)
        if k <= lrw_max:
            groups = [np.arange(k)]
            self.root = 0 if root is None else root
        else:
            dend = _Dendrogram(qlog)
            self.root = dend.core() if root is None else root
            if dend.spread() > plain_spread:
                groups = dend.traps(trap_max)
                order = np.array(dend.dfs_order(self.root), dtype=np.int64)
        self.order = order
        self.trap_of = np.full(k, -1, dtype=np.int64)
        self.loc = np.zeros(k, dtype=np.int64)
        tptr, poff, pins, pouts = [0], [0], [], []
        inside = np.zeros(k, dtype=bool)
        rows = _row_normalize(qlog)
        cdf = np.empty((k, k))
        for t, g in enumerate(groups):
            self.trap_of[g] = t
            self.loc[g] = np.arange(g.size)
            inside[:] = False
            inside[g] = True
            lr = qlog[g]
            lin = lr[:, g]
            lout = logsumexp(np.where(inside[None, :], -np.inf, lr), axis=1)[:, None]
            p = _row_normalize(np.hstack([lin, lout]))
            pin = p[:, :-1].copy()
            np.fill_diagonal(pin, 0.0)
            pins.append(pin.ravel())
            pouts.append(p[:, -1])
            tptr.append(tptr[-1] + g.size)
            poff.append(poff[-1] + g.size * g.size)
            # exit rows: next vertex outside the trap, proportional to conductance
            cdf[g] = np.cumsum(np.where(inside[None, :], 0.0, rows[g]), axis=1)
        free = self.trap_of < 0
        cdf[free] = np.cumsum(rows[free], axis=1)
        self.cdf = cdf
        self.tptr = np.array(tptr, dtype=np.int64)
        self.tmem = np.concatenate(groups) if groups else np.zeros(0, dtype=np.int64)
        self.poff = np.array(poff, dtype=np.int64)
        self.pin = np.concatenate(pins) if pins else np.zeros(0)
        self.pout = np.concatenate(pouts) if pouts else np.zeros(0)

    def sample(self, rng):
        """Parent pointers of a tree rooted at ``self.root`` (its entry is -1)."""
        k = self.k
        parent = np.full(k, -1, dtype=np.int64)
        if k == 2:
            parent[1] = 0
        if k <= 2:
            return parent
        seed = int(rng.integers(0, 2**32))
        return _wilson(self.root, self.order, self.cdf, self.trap_of, self.loc, self.tptr,
                       self.tmem, self.poff, self.pin, self.pout, seed)


def mst_log_spread(log_w) -> float:
    """Log-range of conductances along the maximum-conductance spanning tree."""
    k = log_w.shape[0]
    if k <= 2:
        return 0.0
    finite = np.isfinite(log_w)
    top = np.max(log_w[finite])
    cost = np.where(finite, top - log_w + 1.0, 0.0)
    mst = minimum_spanning_tree(cost).tocoo()
    if mst.nnz < k - 1:
        raise ValueError("network is disconnected")
    return float(mst.data.max() - mst.data.min())


class _Cluster:
    """A factorized cluster: its parts and the quotient graph between them."""

    __slots__ = ("parts", "qlog", "sampler", "blocks")

    def __init__(self, parts, qlog):
        self.parts = parts
        self.qlog = qlog
        self.sampler = None
        self.blocks = {}


class UstSampler:
    """Exact (up to ``exp(log_eps)`` per factorized cluster) weighted UST sampler.

    ``method`` is ``"auto"``, ``"wilson"`` (plain walks only) or
    ``"hierarchical"`` (always build the cluster decomposition).
    """

    def __init__(self, log_w, method="auto", log_eps=LOG_EPS, lrw_max=LRW_MAX,
                 trap_max=TRAP_MAX, plain_spread=PLAIN_SPREAD):
        self.log_w = np.asarray(log_w, dtype=np.float64)
        self.k = self.log_w.shape[0]
        self.log_eps = log_eps
        self.opts = dict(lrw_max=lrw_max, trap_max=trap_max, plain_spread=plain_spread)
        if method not in ("auto", "wilson", "hierarchical"):
            raise ValueError(f"unknown method {method!r}")
        if method == "auto":
            method = "wilson" if mst_log_spread(self.log_w) <= plain_spread else "hierarchical"
        self.method = method
        if method == "wilson":
            self.plain = _QuotientSampler(self.log_w, lrw_max=0, plain_spread=np.inf, root=0)
            self.clusters = None
        else:
            self.plain = None
            self.clusters = self._decompose()

    # -- decomposition -------------------------------------------------
    def _decompose(self):
        L, k = self.log_w, self.k
        rows = -np.sort(-L, axis=1)
        with np.errstate(invalid="ignore"):
            suffix = np.logaddexp.accumulate(rows[:, ::-1], axis=1)[:, ::-1]
        suffix = np.hstack([suffix, np.full((k, 1), -np.inf)])
        deg = np.zeros(k, dtype=np.int64)
        iu, iv = np.triu_indices(k, 1)
        vals = L[iu, iv]
        order = np.argsort(-vals, kind="stable")
        iu, iv, vals = iu[order], iv[order], vals[order]
        uf = UnionFind(k)
        node_of = list(range(k))
        members = {i: [i] for i in range(k)}
        inv = {i: -np.inf for i in range(k)}
        children, separable = {}, {}
        nxt = k
        for a, b, lv in zip(iu.tolist(), iv.tolist(), vals.tolist()):
            ra, rb = uf.find(a), uf.find(b)
            if ra != rb:
                na, nb = node_of[ra], node_of[rb]
                for nd in (na, nb):
                    if nd >= k:
                        mem = members[nd]
                        cut = logsumexp(suffix[mem, deg[mem]])
                        separable[nd] = inv[nd] + cut <= self.log_eps
                children[nxt] = (na, nb)
                inv[nxt] = np.logaddexp(np.logaddexp(inv[na], inv[nb]), -lv)
                members[nxt] = members.pop(na) + members.pop(nb)
                uf.union(ra, rb)
                node_of[uf.find(ra)] = nxt
                nxt += 1
            deg[a] += 1
            deg[b] += 1
            if uf.count == 1:
                break
        if uf.count != 1:
            raise ValueError("network is disconnected")
        root = nxt - 1
        tops = [root] + [nd for nd, s in separable.items() if s]
        clusters = []
        leaf_members = {}
        for top in sorted(tops, reverse=True):
            parts, stack = [], list(children[top])
            while stack:
                c = stack.pop()
                if c < k or separable.get(c, False):
                    parts.append(c)
                else:
                    stack.extend(children[c])
            parts.sort()
            part_members = [np.array(sorted(self._collect(c, children, leaf_members)), dtype=np.int64)
                            for c in parts]
            clusters.append(_Cluster(part_members, self._quotient(part_members)))
        return clusters

    def _collect(self, node, children, cache):
        if node < self.k:
            return [node]
        if node in cache:
            return cache[node]
        out, stack = [], [node]
        while stack:
            x = stack.pop()
            if x < self.k:
                out.append(x)
            else:
                stack.extend(children[x])
        cache[node] = out
        return out

    def _quotient(self, parts):
        m = len(parts)
        L = self.log_w
        q = np.full((m, m), -np.inf)
        if m <= 30:
            for i in range(m):
                for j in range(i + 1, m):
                    q[i, j] = q[j, i] = logsumexp(L[np.ix_(parts[i], parts[j])])
        else:
            allm = np.concatenate(parts)
            starts = np.cumsum([0] + [p.size for p in parts[:-1]])
            sub = L[np.ix_(allm, allm)]
            with np.errstate(invalid="ignore"):
                sub = np.logaddexp.reduceat(sub, starts, axis=0)
                sub = np.logaddexp.reduceat(sub, starts, axis=1)
            q = sub
            np.fill_diagonal(q, -np.inf)
        return q

    # -- sampling --------------------------------------------------------
    def sample_edges(self, rng):
        """List of ``(u, v)`` tree edges."""
        if self.plain is not None:
            parent = self.plain.sample(rng)
            return [(int(v), int(p)) for v, p in enumerate(parent) if p >= 0]
        edges = []
        for cl in self.clusters:
            if cl.sampler is None:
                cl.sampler = _QuotientSampler(cl.qlog, **self.opts)
            parent = cl.sampler.sample(rng)
            for i, j in enumerate(parent):
                if j < 0:
                    continue
                edges.append(self._pick_edge(cl, i, int(j), rng))
        return edges

    def _pick_edge(self, cl, i, j, rng):
        key = (i, j) if i < j else (j, i)
        blk = cl.blocks.get(key)
        if blk is None:
            a, b = cl.parts[key[0]], cl.parts[key[1]]
            sub = self.log_w[np.ix_(a, b)].ravel()
            cdf = np.cumsum(np.exp(sub - sub.max()))
            blk = (a, b, cdf)
            cl.blocks[key] = blk
        a, b, cdf = blk
        r = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        return int(a[r // b.size]), int(b[r % b.size])
