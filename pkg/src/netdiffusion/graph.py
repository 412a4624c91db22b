"""Simple undirected labeled graphs, synthetic generators and degree statistics.

Every node has degree >= 1 and a binary label (1 = infected). Graphs are
immutable; generators and rewiring return new instances.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from numba import njit
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class GraphError(ValueError):
    """A graph violates an invariant (self-loop, multi-edge, isolated node...)."""


class GenerationError(GraphError):
    """A generator could not produce a graph for the requested parameters."""


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable simple undirected graph with binary node labels.

    ``edges`` holds each undirected edge once as ``(u, v)`` with ``u < v``,
    rows sorted lexicographically. Use :meth:`from_edges` to build one.
    """

    n: int
    edges: np.ndarray
    labels: np.ndarray

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, n_edges={self.n_edges}, infected={int(self.labels.sum())})"

    @classmethod
    def from_edges(cls, n, edges, labels=None) -> "Graph":
        n = int(n)
        if n < 1:
            raise GraphError("graph needs at least one node")
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise GraphError("edge endpoint out of range [0, n)")
        if np.any(e[:, 0] == e[:, 1]):
            raise GraphError("self-loop present")
        e = np.sort(e, axis=1)
        order = np.lexsort((e[:, 1], e[:, 0]))
        e = np.ascontiguousarray(e[order])
        if len(e) > 1 and np.any(np.all(e[1:] == e[:-1], axis=1)):
            raise GraphError("parallel edge present")
        deg = np.bincount(e.ravel(), minlength=n)
        if np.any(deg == 0):
            raise GraphError(f"isolated node {int(np.argmin(deg))}")
        if labels is None:
            lab = np.zeros(n, dtype=np.int8)
        else:
            lab = np.asarray(labels).astype(np.int8)
            if lab.shape != (n,):
                raise GraphError("labels must have one entry per node")
            if np.any((lab != 0) & (lab != 1)):
                raise GraphError("labels must be 0 or 1")
        e.setflags(write=False)
        lab.setflags(write=False)
        return cls(n, e, lab)

    def with_labels(self, labels) -> "Graph":
        lab = np.asarray(labels).astype(np.int8)
        if lab.shape != (self.n,) or np.any((lab != 0) & (lab != 1)):
            raise GraphError("labels must be a 0/1 vector of length n")
        lab.setflags(write=False)
        g = Graph(self.n, self.edges, lab)
        # adjacency caches depend only on the edge set
        for name in ("degrees", "_csr", "edge_ends", "is_connected"):
            if name in self.__dict__:
                g.__dict__[name] = self.__dict__[name]
        return g

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.bincount(self.edges.ravel(), minlength=self.n).astype(np.int64)
        d.setflags(write=False)
        return d

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max())

    @cached_property
    def _csr(self):
        u = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        v = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        eid = np.concatenate([np.arange(self.n_edges), np.arange(self.n_edges)])
        order = np.lexsort((v, u))
        indices = np.ascontiguousarray(v[order])
        eid = np.ascontiguousarray(eid[order])
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(self.degrees, out=indptr[1:])
        for a in (indices, indptr, eid):
            a.setflags(write=False)
        return indptr, indices, eid

    @property
    def indptr(self) -> np.ndarray:
        return self._csr[0]

    @property
    def indices(self) -> np.ndarray:
        return self._csr[1]

    @property
    def csr_edge_ids(self) -> np.ndarray:
        """Index into ``edges`` of every adjacency slot in ``indices``."""
        return self._csr[2]

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    @cached_property
    def edge_ends(self) -> tuple[np.ndarray, np.ndarray]:
        """Both orientations of every edge: arrays ``(u, v)`` of length 2|E|."""
        u = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        v = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        return u, v

    @cached_property
    def is_connected(self) -> bool:
        a = coo_matrix((np.ones(self.n_edges), (self.edges[:, 0], self.edges[:, 1])),
                       shape=(self.n, self.n))
        ncomp, _ = connected_components(a, directed=False)
        return ncomp == 1

    def is_bipartite(self) -> bool:
        color = np.full(self.n, -1, dtype=np.int64)
        indptr, indices = self.indptr, self.indices
        for root in range(self.n):
            if color[root] >= 0:
                continue
            color[root] = 0
            stack = [root]
            while stack:
                v = stack.pop()
                for u in indices[indptr[v]:indptr[v + 1]]:
                    if color[u] < 0:
                        color[u] = 1 - color[v]
                        stack.append(u)
                    elif color[u] == color[v]:
                        return False
        return True

    def edge_hash(self) -> str:
        return hashlib.sha256(self.edges.tobytes()).hexdigest()

    def degree_histogram(self) -> dict[int, int]:
        ks, counts = np.unique(self.degrees, return_counts=True)
        return {int(k): int(c) for k, c in zip(ks, counts)}


# ---------------------------------------------------------------- small graphs

def path_graph(n: int, labels=None) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)], labels)


def star_graph(leaves: int, labels=None) -> Graph:
    """Star K_{1,leaves}; node 0 is the hub."""
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)], labels)


def cycle_graph(n: int, labels=None) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)], labels)


def complete_graph(n: int, labels=None) -> Graph:
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)], labels)


def largest_component(g: Graph) -> Graph:
    """Restrict ``g`` to its largest connected component, relabeling nodes 0..n'-1."""
    a = coo_matrix((np.ones(g.n_edges), (g.edges[:, 0], g.edges[:, 1])), shape=(g.n, g.n))
    _, comp = connected_components(a, directed=False)
    big = np.argmax(np.bincount(comp))
    keep = np.flatnonzero(comp == big)
    remap = np.full(g.n, -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    mask = comp[g.edges[:, 0]] == big
    return Graph.from_edges(len(keep), remap[g.edges[mask]], g.labels[keep])


# ---------------------------------------------------------------- generators

def truncated_power_law(alpha: float, d_min: int, d_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Support and probabilities of P(k) proportional to k**-alpha on [d_min, d_max]."""
    ks = np.arange(d_min, d_max + 1)
    w = ks.astype(float) ** -alpha
    return ks, w / w.sum()


def configuration_model(degrees, seed=None, max_repair_tries: int = 200,
                        max_restarts: int = 20) -> Graph:
    """Simple graph with exactly the given degree sequence, by stub matching.

    Self-loops and repeated edges are rematched by swapping one offending pair
    with a random valid pair; the whole matching restarts after
    ``max_repair_tries`` failed rematches of a single pair.
    """
    rng = _as_rng(seed)
    deg = np.asarray(degrees, dtype=np.int64)
    n = len(deg)
    if np.any(deg < 1):
        raise GenerationError("every node needs degree >= 1")
    if deg.sum() % 2:
        raise GenerationError("odd stub sum")
    if np.any(deg > n - 1):
        raise GenerationError("degree exceeds n - 1")
    stubs = np.repeat(np.arange(n, dtype=np.int64), deg)
    for _ in range(max_restarts):
        rng.shuffle(stubs)
        pairs = np.sort(stubs.reshape(-1, 2), axis=1)
        edges = _repair_matching(pairs, n, rng, max_repair_tries)
        if edges is not None:
            return Graph.from_edges(n, edges)
    raise GenerationError(f"stub matching failed after {max_restarts} restarts")


def _repair_matching(pairs, n, rng, max_tries):
    keys = pairs[:, 0] * n + pairs[:, 1]
    seen: set[int] = set()
    bad = []
    for i, (u, v, key) in enumerate(zip(pairs[:, 0], pairs[:, 1], keys)):
        if u == v or key in seen:
            bad.append(i)
        else:
            seen.add(int(key))
    bad_set = set(bad)
    m = len(pairs)
    for i in bad:
        a, b = int(pairs[i, 0]), int(pairs[i, 1])
        for _ in range(max_tries):
            j = int(rng.integers(m))
            if j in bad_set:
                continue
            x, y = int(pairs[j, 0]), int(pairs[j, 1])
            if rng.random() < 0.5:
                x, y = y, x
            if a == x or b == y:
                continue
            k1 = min(a, x) * n + max(a, x)
            k2 = min(b, y) * n + max(b, y)
            if k1 == k2 or k1 in seen or k2 in seen:
                continue
            seen.discard(min(x, y) * n + max(x, y))
            seen.add(k1)
            seen.add(k2)
            pairs[i] = (min(a, x), max(a, x))
            pairs[j] = (min(b, y), max(b, y))
            bad_set.discard(i)
            break
        else:
            return None
    return pairs


def generate_configuration_model(n: int, alpha: float, d_min: int = 1,
                                 d_max: int | None = None, seed=None,
                                 max_restarts: int = 20) -> Graph:
    """Configuration-model graph with a truncated power-law degree distribution.

    Degrees are drawn iid from P(k) proportional to k**-alpha on
    [d_min, d_max] (``d_max`` defaults to floor(sqrt(n))). An odd stub sum is
    fixed by adding one stub to a uniformly chosen node below ``d_max``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if alpha <= 1:
        raise ValueError("alpha must be > 1")
    if d_max is None:
        d_max = max(d_min, int(np.sqrt(n)))
    if not 1 <= d_min <= d_max < n:
        raise ValueError("need 1 <= d_min <= d_max < n")
    rng = _as_rng(seed)
    ks, p = truncated_power_law(alpha, d_min, d_max)
    for _ in range(max_restarts):
        deg = rng.choice(ks, size=n, p=p)
        if deg.sum() % 2:
            room = np.flatnonzero(deg < d_max)
            if len(room) == 0:
                continue
            deg[rng.choice(room)] += 1
        try:
            return configuration_model(deg, rng)
        except GenerationError:
            continue
    raise GenerationError("could not realize a simple graph for the power-law sequence")


def generate_erdos_renyi(n: int, avg_degree: float, seed=None) -> Graph:
    """G(n, p) with p = avg_degree / (n - 1); isolated nodes are dropped."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0 < avg_degree <= n - 1:
        raise ValueError("need 0 < avg_degree <= n - 1")
    rng = _as_rng(seed)
    p = avg_degree / (n - 1)
    n_pairs = n * (n - 1) // 2
    m = int(rng.binomial(n_pairs, p))
    idx = np.sort(rng.choice(n_pairs, size=m, replace=False)) if m < n_pairs else np.arange(n_pairs)
    # row-major index over pairs (i, j), i < j
    i = (n - 2 - np.floor(np.sqrt(-8 * idx + 4 * n * (n - 1) - 7) / 2.0 - 0.5)).astype(np.int64)
    j = (idx + i + 1 - n * (n - 1) // 2 + (n - i) * ((n - i) - 1) // 2).astype(np.int64)
    edges = np.column_stack([i, j])
    deg = np.bincount(edges.ravel(), minlength=n)
    keep = np.flatnonzero(deg > 0)
    if len(keep) < 2:
        raise GenerationError("G(n, p) sample has no edges")
    remap = np.full(n, -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    return Graph.from_edges(len(keep), remap[edges])


# ---------------------------------------------------------------- statistics

@dataclass(frozen=True, eq=False)
class DegreeStats:
    """Exact census statistics of a graph, indexed by the degrees present.

    ``ks`` lists the degree classes in increasing order; ``P``, ``q``,
    ``counts`` and the rows/columns of ``e`` and ``cond`` align with it.
    ``cond[i, j]`` is P(k_i | k_j), the chance that a random neighbor of a
    degree-k_j node has degree k_i.
    """

    ks: np.ndarray
    counts: np.ndarray
    P: np.ndarray
    q: np.ndarray
    e: np.ndarray
    cond: np.ndarray
    mean_degree: float
    max_degree: int
    n: int
    n_edges: int
    sigma_q: float
    r_kk: float
    r_kk_degenerate: bool
    sigma_k: float
    sigma_s: float
    infected_fraction: float
    p_ks: float
    p_ks_degenerate: bool
    infected_counts: np.ndarray = field(repr=False)

    @property
    def z_weights(self) -> np.ndarray:
        """P(d(Z) = k) for Z a uniform neighbor of a uniform node."""
        return self.cond @ self.P

    @property
    def mean_dZ(self) -> float:
        return float(self.ks @ self.z_weights)

    @property
    def population_state(self) -> np.ndarray:
        return self.infected_counts / self.counts


def degree_stats(g: Graph) -> DegreeStats:
    deg = g.degrees
    ks, cls, counts = np.unique(deg, return_inverse=True, return_counts=True)
    n = g.n
    P = counts / n
    kbar = deg.mean()
    q = ks * P / kbar
    u, v = g.edge_ends
    m2 = len(u)
    e = np.zeros((len(ks), len(ks)))
    np.add.at(e, (cls[u], cls[v]), 1.0)
    e /= m2
    cond = e / q[None, :]
    mu_q = ks @ q
    var_q = (ks ** 2) @ q - mu_q ** 2
    if var_q <= 1e-14 * max(1.0, mu_q ** 2):
        r_kk, r_deg = 0.0, True
    else:
        r_kk = float(ks @ (e - np.outer(q, q)) @ ks / var_q)
        r_deg = False
    sigma_k = float(np.sqrt(max((ks ** 2) @ P - ((ks @ P) ** 2), 0.0)))
    labels = g.labels.astype(np.int64)
    inf_counts = np.bincount(cls, weights=labels, minlength=len(ks))
    rho = labels.mean()
    sigma_s = float(np.sqrt(rho * (1 - rho)))
    if sigma_s == 0.0 or sigma_k <= 1e-12:
        p_ks, p_deg = 0.0, True
    else:
        joint = inf_counts / n
        p_ks = float(ks @ (joint - rho * P) / (sigma_k * sigma_s))
        p_deg = False
    return DegreeStats(ks=ks, counts=counts, P=P, q=q, e=e, cond=cond,
                       mean_degree=float(kbar), max_degree=int(ks[-1]), n=n,
                       n_edges=g.n_edges, sigma_q=float(np.sqrt(max(var_q, 0.0))),
                       r_kk=r_kk, r_kk_degenerate=r_deg, sigma_k=sigma_k,
                       sigma_s=sigma_s, infected_fraction=float(rho), p_ks=p_ks,
                       p_ks_degenerate=p_deg, infected_counts=inf_counts)


# ---------------------------------------------------------------- rewiring

@dataclass(frozen=True)
class RewireResult:
    graph: Graph
    r_kk: float
    converged: bool
    swaps: int
    proposals: int


@njit(cache=True)
def _rewire_kernel(eu, ev, deg, n, s_sum, mu, var, target, tol, max_steps, rng):
    m = eu.shape[0]
    keys = set()
    for i in range(m):
        keys.add(eu[i] * n + ev[i])
    r = (s_sum / m - mu * mu) / var
    swaps = 0
    steps = 0
    while abs(r - target) > tol and steps < max_steps:
        steps += 1
        i = rng.integers(0, m)
        j = rng.integers(0, m)
        if i == j:
            continue
        a = eu[i]
        b = ev[i]
        if rng.random() < 0.5:
            c = eu[j]
            d = ev[j]
        else:
            c = ev[j]
            d = eu[j]
        # (a, b), (c, d) -> (a, d), (c, b)
        if a == d or c == b:
            continue
        k1 = min(a, d) * n + max(a, d)
        k2 = min(c, b) * n + max(c, b)
        if k1 == k2 or k1 in keys or k2 in keys:
            continue
        delta = deg[a] * deg[d] + deg[c] * deg[b] - deg[a] * deg[b] - deg[c] * deg[d]
        r_new = ((s_sum + delta) / m - mu * mu) / var
        if abs(r_new - target) < abs(r - target):
            keys.remove(eu[i] * n + ev[i])
            keys.remove(eu[j] * n + ev[j])
            keys.add(k1)
            keys.add(k2)
            eu[i] = min(a, d)
            ev[i] = max(a, d)
            eu[j] = min(c, b)
            ev[j] = max(c, b)
            s_sum += delta
            r = r_new
            swaps += 1
    return s_sum, swaps, steps


def rewire_to_assortativity(g: Graph, target_rkk: float, tol: float = 0.01,
                            max_steps: int | None = None, seed=None) -> RewireResult:
    """Degree-preserving double-edge swaps, greedily accepted toward ``target_rkk``.

    A swap is kept iff it strictly reduces |r_kk - target|. Stops once within
    ``tol`` or after ``max_steps`` proposals (default 200 * |E|); the
    result carries ``converged=False`` in the latter case.
    """
    stats = degree_stats(g)
    if abs(stats.r_kk - target_rkk) <= tol:
        return RewireResult(g, stats.r_kk, True, 0, 0)
    if stats.r_kk_degenerate:
        return RewireResult(g, stats.r_kk, False, 0, 0)
    rng = _as_rng(seed)
    if max_steps is None:
        max_steps = 200 * g.n_edges
    deg = g.degrees
    eu = g.edges[:, 0].copy()
    ev = g.edges[:, 1].copy()
    s_sum = int(np.sum(deg[eu] * deg[ev]))
    mu = stats.ks @ stats.q
    var = stats.sigma_q ** 2
    _, swaps, steps = _rewire_kernel(eu, ev, deg, g.n, s_sum, mu, var,
                                     float(target_rkk), float(tol), int(max_steps), rng)
    out = Graph.from_edges(g.n, np.column_stack([eu, ev]), g.labels)
    r = degree_stats(out).r_kk
    return RewireResult(out, r, abs(r - target_rkk) <= tol, int(swaps), int(steps))


# ---------------------------------------------------------------- labels

@dataclass(frozen=True)
class LabelResult:
    graph: Graph
    p_ks: float
    converged: bool
    degenerate: bool
    swaps: int


@njit(cache=True)
def _label_kernel(labels, ones, zeros, deg, sd, n, rho, mean_k, scale, target, tol,
                  max_steps, rng):
    n1 = ones.shape[0]
    n0 = zeros.shape[0]
    p = (sd / n - rho * mean_k) / scale
    swaps = 0
    steps = 0
    while abs(p - target) > tol and steps < max_steps:
        steps += 1
        i = rng.integers(0, n1)
        j = rng.integers(0, n0)
        a = ones[i]
        b = zeros[j]
        sd_new = sd - deg[a] + deg[b]
        p_new = (sd_new / n - rho * mean_k) / scale
        if abs(p_new - target) < abs(p - target):
            labels[a] = 0
            labels[b] = 1
            ones[i] = b
            zeros[j] = a
            sd = sd_new
            p = p_new
            swaps += 1
    return swaps


def assign_labels(g: Graph, target_fraction: float, target_pks: float = 0.0,
                  tol: float = 0.01, seed=None, max_steps: int | None = None) -> LabelResult:
    """Label exactly round(target_fraction * n) nodes infected with degree-label
    correlation p_ks near ``target_pks``.

    Starts from a uniformly random labeling, then swaps the labels of an
    infected/susceptible pair whenever that moves p_ks toward the target.
    """
    if not 0.0 <= target_fraction <= 1.0:
        raise ValueError("target_fraction must lie in [0, 1]")
    rng = _as_rng(seed)
    n = g.n
    count = int(round(target_fraction * n))
    labels = np.zeros(n, dtype=np.int8)
    labels[rng.choice(n, size=count, replace=False)] = 1
    out = g.with_labels(labels)
    stats = degree_stats(out)
    if stats.p_ks_degenerate:
        return LabelResult(out, 0.0, abs(target_pks) <= tol, True, 0)
    if abs(stats.p_ks - target_pks) <= tol:
        return LabelResult(out, stats.p_ks, True, False, 0)
    if max_steps is None:
        max_steps = 200 * n
    deg = g.degrees
    ones = np.flatnonzero(labels == 1).astype(np.int64)
    zeros = np.flatnonzero(labels == 0).astype(np.int64)
    sd = int(deg[ones].sum())
    rho = count / n
    scale = stats.sigma_k * stats.sigma_s
    swaps = _label_kernel(labels, ones, zeros, deg, sd, n, rho, float(deg.mean()), scale,
                          float(target_pks), float(tol), int(max_steps), rng)
    out = g.with_labels(labels)
    p = degree_stats(out).p_ks
    return LabelResult(out, p, abs(p - target_pks) <= tol, False, int(swaps))


# ---------------------------------------------------------------- edge-list io

def write_edgelist(g: Graph, path, label_path=None) -> None:
    np.savetxt(path, g.edges, fmt="%d")
    if label_path is not None:
        np.savetxt(label_path, np.column_stack([np.arange(g.n), g.labels]), fmt="%d")


def read_edgelist(path, label_path=None, n: int | None = None) -> Graph:
    """Load a graph from "u v" lines (0-indexed), with an optional "v s" label file."""
    text = Path(path).read_text().split()
    if len(text) % 2:
        raise GraphError("edge list must contain pairs of node ids")
    edges = np.array(text, dtype=np.int64).reshape(-1, 2)
    labels = None
    if label_path is not None:
        rows = np.loadtxt(label_path, dtype=np.int64, ndmin=2)
        if n is None:
            n = int(rows[:, 0].max()) + 1
        labels = np.zeros(n, dtype=np.int8)
        labels[rows[:, 0]] = rows[:, 1]
    if n is None:
        n = int(edges.max()) + 1 if len(edges) else 0
    return Graph.from_edges(n, edges, labels)
