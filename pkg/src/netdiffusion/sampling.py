"""Node samplers (random node X, random friend Y, random friend Z of a random
node), random walks, respondent-driven sampling and exact friendship-paradox
census checks."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .graph import Graph, _as_rng


class BipartiteWarning(UserWarning):
    """The chain runs on a bipartite graph, so it is periodic."""


def sample_uniform_node(g: Graph, rng, size=None):
    return rng.integers(0, g.n, size=size)


def sample_random_friend(g: Graph, rng, size=None):
    """Uniform end of a uniform edge: P(v) = d(v) / 2|E|."""
    ends = g.edge_ends[0]
    return ends[rng.integers(0, len(ends), size=size)]


def sample_friend_of_random_node(g: Graph, rng, size=None):
    """Uniform neighbor of a uniform node (two-stage)."""
    v = rng.integers(0, g.n, size=size)
    deg = g.degrees[v]
    offset = np.floor(rng.random(size=size) * deg).astype(np.int64)
    return g.indices[g.indptr[v] + offset]


@njit(cache=True)
def _walk_kernel(indptr, indices, starts, steps, lazy, rng):
    out = starts.copy()
    for w in range(out.shape[0]):
        v = out[w]
        for _ in range(steps):
            if lazy and rng.random() < 0.5:
                continue
            lo = indptr[v]
            d = indptr[v + 1] - lo
            v = indices[lo + rng.integers(0, d)]
        out[w] = v
    return out


def random_walks(g: Graph, starts, steps: int, rng, lazy: bool = False) -> np.ndarray:
    """Endpoints of independent simple random walks, one per start node.

    ``lazy=True`` holds in place with probability 1/2 at every step, which
    keeps the degree-proportional stationary law but makes the chain aperiodic
    on bipartite graphs.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    starts = np.atleast_1d(np.asarray(starts, dtype=np.int64))
    if steps == 0:
        return starts.copy()
    return _walk_kernel(g.indptr, g.indices, starts, int(steps), bool(lazy), rng)


def random_walk(g: Graph, start: int, steps: int, rng, lazy: bool = False) -> int:
    return int(random_walks(g, [start], steps, rng, lazy)[0])


def walk_mixing_tv(g: Graph, endpoints) -> float:
    """Total-variation distance between the endpoint degree histogram and q(k)."""
    from .graph import degree_stats

    stats = degree_stats(g)
    cls = np.searchsorted(stats.ks, g.degrees[np.asarray(endpoints)])
    emp = np.bincount(cls, minlength=len(stats.ks)) / len(cls)
    return 0.5 * float(np.abs(emp - stats.q).sum())


@njit(cache=True)
def _rds_kernel(indptr, indices, cumw, start, length, burn_in, rng):
    chain = np.empty(length, dtype=np.int64)
    v = start
    for t in range(burn_in + length):
        if t >= burn_in:
            chain[t - burn_in] = v
        lo = indptr[v]
        hi = indptr[v + 1]
        u = rng.random() * cumw[hi - 1]
        # first slot whose cumulative weight exceeds u
        a = lo
        b = hi - 1
        while a < b:
            mid = (a + b) // 2
            if cumw[mid] > u:
                b = mid
            else:
                a = mid + 1
        v = indices[a]
    return chain


def rds_chain(g: Graph, chain_length: int, seed=None, weights=None, start=None,
              burn_in: int = 0):
    """Recruitment chain with transition W_ij / sum_j W_ij.

    Returns the visited nodes and the stationary law pi(i) = sum_j W_ij / sum W.
    ``weights`` is one positive value per row of ``g.edges`` (default all 1).
    """
    rng = _as_rng(seed)
    if weights is None:
        w_edge = np.ones(g.n_edges)
    else:
        w_edge = np.asarray(weights, dtype=float)
        if w_edge.shape != (g.n_edges,) or np.any(w_edge <= 0):
            raise ValueError("weights must be positive, one per edge")
    total = 2.0 * w_edge.sum()
    if not total > 0:
        raise ValueError("total edge weight must be positive")
    if g.is_bipartite():
        warnings.warn("graph is bipartite: the recruitment chain is periodic",
                      BipartiteWarning, stacklevel=2)
    w_slot = w_edge[g.csr_edge_ids]
    strength = np.add.reduceat(w_slot, g.indptr[:-1])
    # per-node cumulative weights, each segment restarting at zero
    seg_start = np.repeat(np.concatenate([[0.0], np.cumsum(w_slot)])[g.indptr[:-1]], g.degrees)
    cumw = np.cumsum(w_slot) - seg_start
    if start is None:
        start = int(rng.integers(0, g.n))
    chain = _rds_kernel(g.indptr, g.indices, cumw, int(start), int(chain_length),
                        int(burn_in), rng)
    return chain, strength / total


def rds_estimate(g: Graph, chain_length: int, seed=None, statistic=None, weights=None,
                 start=None, burn_in: int = 0) -> float:
    """Importance-reweighted chain average sum(stat/pi) / sum(1/pi).

    ``statistic`` is a per-node array (default: the node labels).
    """
    if chain_length < 1:
        raise ValueError("chain_length must be >= 1")
    stat = g.labels if statistic is None else np.asarray(statistic)
    chain, pi = rds_chain(g, chain_length, seed, weights, start, burn_in)
    inv = 1.0 / pi[chain]
    return float(np.sum(stat[chain] * inv) / np.sum(inv))


@dataclass(frozen=True)
class ParadoxReport:
    ks: np.ndarray
    pmf_dX: np.ndarray
    pmf_dY: np.ndarray
    pmf_dZ: np.ndarray
    mean_dX: float
    mean_dY: float
    mean_dZ: float
    fosd_ZX_holds: bool
    lr_YX_monotone: bool

    @property
    def cdf_dX(self):
        return np.cumsum(self.pmf_dX)

    @property
    def cdf_dY(self):
        return np.cumsum(self.pmf_dY)

    @property
    def cdf_dZ(self):
        return np.cumsum(self.pmf_dZ)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["degree", "cdf_X", "cdf_Y", "cdf_Z"])
            for row in zip(self.ks, self.cdf_dX, self.cdf_dY, self.cdf_dZ):
                w.writerow([int(row[0])] + [f"{x:.12g}" for x in row[1:]])


def verify_friendship_paradox(g: Graph, atol: float = 1e-12) -> ParadoxReport:
    """Exact laws of d(X), d(Y), d(Z) by enumeration, plus dominance checks."""
    deg = g.degrees
    ks, cls = np.unique(deg, return_inverse=True)
    nk = len(ks)
    f_x = np.bincount(cls, minlength=nk) / g.n
    u, v = g.edge_ends
    f_y = np.bincount(cls[u], minlength=nk) / len(u)
    # Z: pick node u with prob 1/n, then neighbor v with prob 1/d(u)
    f_z = np.bincount(cls[v], weights=1.0 / (g.n * deg[u]), minlength=nk)
    ratio = f_y / f_x
    lr_ok = bool(np.all(np.diff(ratio) > -atol))
    fosd_ok = bool(np.all(np.cumsum(f_z) <= np.cumsum(f_x) + atol))
    return ParadoxReport(ks=ks, pmf_dX=f_x, pmf_dY=f_y, pmf_dZ=f_z,
                         mean_dX=float(ks @ f_x), mean_dY=float(ks @ f_y),
                         mean_dZ=float(ks @ f_z), fosd_ZX_holds=fosd_ok,
                         lr_YX_monotone=lr_ok)
