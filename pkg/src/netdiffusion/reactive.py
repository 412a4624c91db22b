"""SIS diffusion on a reactive network.

A reactive network is a Markov chain over a finite set of graphs whose
transition matrix depends on the current population state. All graphs share
the node set and the degree histogram, so the per-class state x(k) keeps its
meaning across switches. Under monophilic contagion the joint process is
approximated by the constrained ODE

    dx/dt = E_{G ~ pi_x}[H(x, G)],   P_x' pi_x = pi_x,

with H_k(x, G) = (1 - x(k)) nu k theta_G / D - delta x(k) and theta_G the
friend-of-node weighted infected fraction on G.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numba import njit
from scipy.sparse.csgraph import connected_components

from .graph import DegreeStats, Graph, degree_stats
from .meanfield import MfdParams, NumericalError
from .sis import ACTIVATIONS, NEIGHBOR_MODES, RULES, SisConfig, _sis_tick


class AssumptionError(ValueError):
    """A reactive-network assumption (shared degrees, irreducible kernel) fails."""


def _check_stochastic(P, atol=1e-12):
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise AssumptionError(f"transition matrix must be square, got shape {P.shape}")
    if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1) > atol):
        raise AssumptionError("transition matrix must be row-stochastic")
    return P


def is_irreducible(P) -> bool:
    ncomp, _ = connected_components(np.asarray(P) > 0, directed=True, connection="strong")
    return ncomp == 1


def stationary_distribution(P, tol: float = 1e-12) -> np.ndarray:
    """Unique pi with P' pi = pi, sum(pi) = 1, for an irreducible stochastic P.

    Solved directly: the balance equations with one row replaced by the
    normalization, then one step of iterative refinement.
    """
    P = _check_stochastic(P)
    if P.shape[0] > 1 and not is_irreducible(P):
        raise AssumptionError("transition matrix is reducible; the graph chain needs a "
                              "unique stationary distribution (irreducibility assumption)")
    return _solve_stationary(P, tol)


def _solve_stationary(P, tol):
    N = P.shape[0]
    if N == 1:
        return np.ones(1)
    A = P.T - np.eye(N)
    A[-1] = 1.0
    rhs = np.zeros(N)
    rhs[-1] = 1.0
    pi = np.linalg.solve(A, rhs)
    pi += np.linalg.solve(A, rhs - A @ pi)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    res = np.abs(P.T @ pi - pi).sum()
    if res > tol:
        raise NumericalError(f"stationary residual {res:.3g} exceeds {tol:.3g}")
    return pi


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True)
class LogisticKernel:
    """P_x = (1 - s) P_low + s P_high with s = sigmoid(c (rho(x) - rho0)).

    rho(x) = sum_k P(k) x(k) is the overall infected fraction, so the kernel
    depends on the state only through rho.
    """

    P_low: np.ndarray
    P_high: np.ndarray
    c: float
    rho0: float = 0.0

    def __post_init__(self):
        lo = _check_stochastic(self.P_low)
        hi = _check_stochastic(self.P_high)
        if lo.shape != hi.shape:
            raise AssumptionError("P_low and P_high differ in shape")
        object.__setattr__(self, "P_low", lo)
        object.__setattr__(self, "P_high", hi)

    @property
    def size(self) -> int:
        return self.P_low.shape[0]

    def at_rho(self, rho: float) -> np.ndarray:
        s = _sigmoid(self.c * (rho - self.rho0))
        return (1 - s) * self.P_low + s * self.P_high

    def __call__(self, x, P) -> np.ndarray:
        return self.at_rho(float(np.asarray(P) @ np.asarray(x)))


class ConstantKernel:
    """State-independent transition matrix."""

    def __init__(self, P):
        self.P = _check_stochastic(P)

    @property
    def size(self) -> int:
        return self.P.shape[0]

    def at_rho(self, rho):
        return self.P

    def __call__(self, x, P):
        return self.P


@dataclass(frozen=True, eq=False)
class ReactiveNetwork:
    """Graphs sharing one node set and degree histogram, plus a state-dependent kernel.

    ``kernel(x, P)`` maps per-class infected fractions x (and the degree
    distribution P) to an N x N row-stochastic matrix. Row-stochasticity and
    irreducibility are checked at construction on a grid of states: constant
    states on 11 levels plus ``check_points`` random states.
    """

    graphs: tuple
    kernel: Callable
    check_points: int = 20

    def __post_init__(self):
        graphs = tuple(self.graphs)
        if not graphs:
            raise AssumptionError("need at least one graph")
        object.__setattr__(self, "graphs", graphs)
        g0 = graphs[0]
        ref = np.bincount(g0.degrees)
        for i, g in enumerate(graphs[1:], 1):
            if g.n != g0.n:
                raise AssumptionError(f"graph {i} has {g.n} nodes, graph 0 has {g0.n}")
            h = np.bincount(g.degrees, minlength=len(ref))
            if len(h) != len(ref) or np.any(h != ref):
                raise AssumptionError(f"graph {i} has a different degree histogram "
                                      "(shared degree distribution assumption)")
        stats = tuple(degree_stats(g) for g in graphs)
        object.__setattr__(self, "_stats", stats)
        K = len(stats[0].ks)
        rng = np.random.default_rng(0)
        grid = [np.full(K, v) for v in np.linspace(0, 1, 11)]
        grid += list(rng.random((self.check_points, K)))
        for x in grid:
            P = _check_stochastic(self.kernel(x, stats[0].P))
            if P.shape != (self.size, self.size):
                raise AssumptionError(f"kernel returned shape {P.shape}, expected "
                                      f"{(self.size, self.size)}")
            if not is_irreducible(P):
                raise AssumptionError("kernel is reducible at some state "
                                      "(irreducibility assumption)")

    @property
    def size(self) -> int:
        return len(self.graphs)

    @property
    def stats(self) -> tuple[DegreeStats, ...]:
        return self._stats

    @property
    def ks(self) -> np.ndarray:
        return self._stats[0].ks

    @property
    def P(self) -> np.ndarray:
        return self._stats[0].P

    @property
    def z_weights(self) -> np.ndarray:
        """Row i holds the friend-of-node degree law on graph i."""
        return np.array([s.z_weights for s in self._stats])

    def transition(self, x) -> np.ndarray:
        return self.kernel(np.asarray(x, dtype=float), self.P)

    def stationary(self, x, tol: float = 1e-12) -> np.ndarray:
        return stationary_distribution(self.transition(x), tol)


# ---------------------------------------------------------------- joint simulation

@njit(cache=True)
def _joint_kernel(indptr, indices, deg, ends, cls, states, inf, ticks, record_every,
                  nu, delta, D, act, rule, unbiased, allow_self, rng, grng, table,
                  tabulated, gi, out, gout, occupancy, activations):
    N = table.shape[1]
    ninf = inf.sum()
    for t in range(ticks):
        nxt = gi
        if N > 1:
            row = table[ninf if tabulated else 0, gi]
            u = grng.random()
            nxt = 0
            while nxt < N - 1 and u >= row[nxt]:
                nxt += 1
        _sis_tick(indptr[gi], indices[gi], deg[gi], ends[gi], cls[gi], states, inf, nu,
                  delta, D, act, rule, unbiased, allow_self, rng, activations)
        ninf = inf.sum()
        if nxt != gi:
            # classes are per graph; recount in case node degrees moved
            for j in range(inf.shape[0]):
                inf[j] = 0
            for j in range(states.shape[0]):
                inf[cls[nxt][j]] += states[j]
            gi = nxt
        occupancy[gi] += 1
        if (t + 1) % record_every == 0:
            out[(t + 1) // record_every] = inf
            gout[(t + 1) // record_every] = gi
    return gi


@dataclass
class JointTrajectory:
    """Per-class infected counts and the graph index at each recorded tick."""

    ks: np.ndarray
    counts: np.ndarray
    ticks: np.ndarray
    infected: np.ndarray
    graph_index: np.ndarray
    occupancy: np.ndarray
    final_states: np.ndarray
    final_graph: int
    seed: object = None
    meta: dict = field(default_factory=dict)

    @property
    def x(self) -> np.ndarray:
        return self.infected / self.counts

    @property
    def P(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    @property
    def infected_fraction(self) -> np.ndarray:
        return self.infected.sum(axis=1) / self.counts.sum()

    @property
    def sweeps(self) -> np.ndarray:
        return self.ticks / self.counts.sum()

    @property
    def occupancy_fraction(self) -> np.ndarray:
        return self.occupancy / self.occupancy.sum()

    def to_csv(self, path) -> None:
        x = self.x
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sweep", "graph", "k", "x_k"])
            for i, sw in enumerate(self.sweeps):
                for j, k in enumerate(self.ks):
                    w.writerow([f"{sw:.12g}", int(self.graph_index[i]), int(k),
                                f"{x[i, j]:.12g}"])


def _graph_rng(seed):
    """Stream for graph transitions, independent of the SIS stream of ``seed``."""
    if isinstance(seed, np.random.Generator):
        return seed.spawn(1)[0]
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))


def _tabulate(rn: ReactiveNetwork, n: int, max_entries: int = 5_000_000):
    """Cumulative transition rows for every infected count, if the kernel allows it."""
    N = rn.size
    if not hasattr(rn.kernel, "at_rho") or (n + 1) * N * N > max_entries:
        return None
    rho = np.arange(n + 1) / n
    return np.cumsum(np.array([rn.kernel.at_rho(r) for r in rho]), axis=2)


def simulate_joint(rn: ReactiveNetwork, cfg: SisConfig, g_init: int, steps: int,
                   seed=None, record_every: int = 1, initial=None) -> JointTrajectory:
    """Run the SIS chain and the graph chain together for ``steps`` ticks.

    Each tick draws G_{n+1} ~ P_{x_n}(. | G_n), then applies one SIS tick to
    the pre-switch state on G_n. Node states persist across switches. The SIS
    draws come from the stream of ``seed`` exactly as in the static
    simulator, and graph transitions use a separate child stream, so a
    one-graph network reproduces the static run tick for tick.
    """
    if RULES[cfg.rule] != 1:
        raise ValueError("the reactive-network dynamics are defined for monophilic contagion")
    if not 0 <= g_init < rn.size:
        raise ValueError(f"g_init must lie in [0, {rn.size})")
    if steps < 0 or record_every < 1:
        raise ValueError("steps must be >= 0 and record_every >= 1")
    g0 = rn.graphs[0]
    D = cfg.resolve_D(g0)
    n = g0.n
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    grng = _graph_rng(seed)
    ks = rn.ks
    indptr = np.array([g.indptr for g in rn.graphs])
    indices = np.array([g.indices for g in rn.graphs])
    deg = np.array([g.degrees for g in rn.graphs])
    ends = np.array([g.edge_ends[0] for g in rn.graphs])
    cls = np.searchsorted(ks, deg).astype(np.int64)
    states = np.asarray(rn.graphs[g_init].labels if initial is None else initial,
                        dtype=np.int8).copy()
    inf = np.bincount(cls[g_init], weights=states, minlength=len(ks)).astype(np.int64)
    out = np.empty((steps // record_every + 1, len(ks)), dtype=np.int64)
    gout = np.empty(steps // record_every + 1, dtype=np.int64)
    out[0], gout[0] = inf, g_init
    occupancy = np.zeros(rn.size, dtype=np.int64)
    activations = np.zeros(n, dtype=np.int64)
    args = (float(cfg.nu), float(cfg.delta), float(D), ACTIVATIONS[cfg.activation],
            RULES[cfg.rule], bool(NEIGHBOR_MODES[cfg.neighbor_mode]), bool(cfg.allow_self))
    table = _tabulate(rn, n)
    gi = g_init
    if table is not None:
        gi = _joint_kernel(indptr, indices, deg, ends, cls, states, inf, steps, record_every,
                           *args, rng, grng, table, True, gi, out, gout, occupancy,
                           activations)
    else:
        one, gone = np.empty((2, len(ks)), dtype=np.int64), np.empty(2, dtype=np.int64)
        counts = np.bincount(cls[0], minlength=len(ks))
        for t in range(steps):
            row = np.cumsum(rn.transition(inf / counts), axis=1)[None]
            gi = _joint_kernel(indptr, indices, deg, ends, cls, states, inf, 1, 1, *args,
                               rng, grng, row, False, gi, one, gone, occupancy, activations)
            if (t + 1) % record_every == 0:
                out[(t + 1) // record_every] = inf
                gout[(t + 1) // record_every] = gi
    counts = np.bincount(cls[gi], minlength=len(ks))
    if np.any(counts != rn.stats[0].counts):
        raise AssumptionError("degree histogram changed across a graph switch")
    return JointTrajectory(ks=ks, counts=counts, ticks=np.arange(len(out)) * record_every,
                           infected=out, graph_index=gout, occupancy=occupancy,
                           final_states=states, final_graph=int(gi),
                           seed=int(seed) if isinstance(seed, (int, np.integer)) else None)


# ---------------------------------------------------------------- constrained ODE

@dataclass(frozen=True)
class ConstrainedOdeState:
    x: np.ndarray
    pi: np.ndarray
    residual: float


@dataclass
class ConstrainedOdeTrajectory:
    ks: np.ndarray
    ticks: np.ndarray
    x: np.ndarray
    pi: np.ndarray
    residual: np.ndarray
    M: float

    def __len__(self):
        return len(self.ticks)

    def __getitem__(self, i) -> ConstrainedOdeState:
        return ConstrainedOdeState(self.x[i], self.pi[i], float(self.residual[i]))

    @property
    def sweeps(self) -> np.ndarray:
        return self.ticks / self.M

    def rho(self, P) -> np.ndarray:
        return self.x @ np.asarray(P)


@njit(cache=True)
def _ode_tick(x, ks, W, pi, nu, delta, D, a):
    N, K = W.shape
    theta = np.zeros(N)
    for i in range(N):
        for j in range(K):
            theta[i] += W[i, j] * x[j]
    for j in range(K):
        h = 0.0
        for i in range(N):
            h += pi[i] * ((1.0 - x[j]) * nu * ks[j] * theta[i] / D - delta * x[j])
        x[j] += a[j] * h


def constrained_ode_trajectory(rn: ReactiveNetwork, params: MfdParams, x0, sweeps: float,
                               record_every: int | None = None,
                               tol: float = 1e-10) -> ConstrainedOdeTrajectory:
    """Euler iterates x <- x + (1/M) E_{G ~ pi_x}[H(x, G)], one per tick.

    pi_x is re-solved at every tick; rows are recorded every ``record_every``
    ticks (default one sweep of M ticks) together with pi_x and the residual
    |P_x' pi_x - pi_x|_1 at the recorded state.
    """
    if params.rule != "monophilic":
        raise ValueError("the reactive-network ODE is defined for monophilic contagion")
    if params.activation not in ("X", "uniform-X"):
        raise ValueError("the reactive-network ODE uses uniform activation")
    x = np.array(x0, dtype=float)
    if x.shape != rn.ks.shape or np.any(x < 0) or np.any(x > 1):
        raise ValueError("x0 must hold one value in [0, 1] per degree class")
    M = params.size
    ticks = int(round(sweeps * M))
    rec = max(int(round(M)), 1) if record_every is None else int(record_every)
    if rec < 1:
        raise ValueError("record_every must be >= 1")
    W = rn.z_weights
    ks = rn.ks.astype(float)
    a = np.ones(len(ks)) / M
    D = float(params.max_degree)
    nrec = ticks // rec + 1
    xs = np.empty((nrec, len(ks)))
    pis = np.empty((nrec, rn.size))
    res = np.empty(nrec)

    P = rn.P
    kernel = rn.kernel

    def constrained(x):
        # stochasticity and irreducibility were checked when rn was built
        Px = kernel(x, P)
        try:
            pi = _solve_stationary(Px, tol)
        except np.linalg.LinAlgError as exc:
            raise AssumptionError("transition matrix is reducible at the current state "
                                  "(irreducibility assumption)") from exc
        return pi, float(np.abs(Px.T @ pi - pi).sum())

    pi, r = constrained(x)
    xs[0], pis[0], res[0] = x, pi, r
    for t in range(ticks):
        _ode_tick(x, ks, W, pi, float(params.nu), float(params.delta), D, a)
        if x.min() < -1e-12 or x.max() > 1 + 1e-12:
            raise NumericalError("ODE iterate left [0, 1]; M is too small for the step")
        pi, r = constrained(x)
        if (t + 1) % rec == 0:
            i = (t + 1) // rec
            xs[i], pis[i], res[i] = x, pi, r
    return ConstrainedOdeTrajectory(ks=rn.ks, ticks=np.arange(nrec) * rec, x=xs, pi=pis,
                                    residual=res, M=M)


def rewired_family(g: Graph, targets: Sequence[float], seed=None, **kw) -> list[Graph]:
    """Degree-preserving rewirings of ``g`` towards each assortativity target.

    Every member keeps each node's degree and label, so the family satisfies
    the shared-degree assumption by construction.
    """
    from .graph import rewire_to_assortativity

    ss = np.random.SeedSequence(seed)
    return [rewire_to_assortativity(g, r, seed=np.random.default_rng(s), **kw).graph
            for r, s in zip(targets, ss.spawn(len(targets)))]
