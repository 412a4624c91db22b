"""Stochastic discrete-time SIS dynamics on a graph.

One tick activates a single node m. An infected m recovers with probability
delta. A susceptible m looks at d(m) targets (its neighbors, or d(m) uniform
nodes in unbiased-degree mode) and becomes infected with probability
nu * a / D, where a counts infected targets (non-monophilic) or infected
uniform friends of the targets (monophilic).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from .graph import Graph, _as_rng

ACTIVATIONS = {"X": 0, "uniform-X": 0, "Y": 1, "random-friend-Y": 1,
               "Z": 2, "friend-of-node-Z": 2}
RULES = {"non-monophilic": 0, "monophilic": 1}
NEIGHBOR_MODES = {"graph-neighbors": 0, "graph": 0, "unbiased-degree": 1, "unbiased": 1}


@dataclass(frozen=True)
class SisConfig:
    """Parameters of the viral SIS rule.

    ``activation`` is X (uniform node), Y (random edge end) or Z (random friend
    of a random node). ``D`` defaults to the graph's maximum degree. In
    unbiased-degree mode the active node may draw itself as a target unless
    ``allow_self`` is False.
    """

    nu: float
    delta: float
    activation: str = "X"
    rule: str = "non-monophilic"
    neighbor_mode: str = "unbiased-degree"
    D: int | None = None
    allow_self: bool = True

    def __post_init__(self):
        if not 0.0 <= self.nu <= 1.0:
            raise ValueError(f"nu must lie in [0, 1], got {self.nu}")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}")
        if self.neighbor_mode not in NEIGHBOR_MODES:
            raise ValueError(f"unknown neighbor_mode {self.neighbor_mode!r}")
        if self.D is not None and self.D < 1:
            raise ValueError("D must be >= 1")

    @property
    def spreading_rate(self) -> float:
        return self.nu / self.delta

    @property
    def activation_code(self) -> str:
        return "XYZ"[ACTIVATIONS[self.activation]]

    def resolve_D(self, g: Graph) -> int:
        D = g.max_degree if self.D is None else int(self.D)
        if D < g.max_degree:
            raise ValueError(f"D={D} is below the maximum degree {g.max_degree}")
        return D


@dataclass(frozen=True)
class PopulationState:
    """Infected counts per degree class; ``x`` gives the fractions."""

    ks: np.ndarray
    counts: np.ndarray
    infected: np.ndarray

    @property
    def x(self) -> np.ndarray:
        return self.infected / self.counts

    @property
    def P(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    @property
    def infected_fraction(self) -> float:
        return float(self.infected.sum() / self.counts.sum())


def population_state(g: Graph, states=None) -> PopulationState:
    """Census of per-degree infected counts (``states`` defaults to the labels)."""
    s = g.labels if states is None else np.asarray(states)
    ks, cls, counts = np.unique(g.degrees, return_inverse=True, return_counts=True)
    inf = np.bincount(cls, weights=s, minlength=len(ks)).astype(np.int64)
    return PopulationState(ks=ks, counts=counts, infected=inf)


@njit(cache=True)
def _sis_tick(indptr, indices, deg, ends, cls, states, inf, nu, delta, D, act, rule,
              unbiased, allow_self, rng, activations):
    n = deg.shape[0]
    if act == 0:
        m = rng.integers(0, n)
    elif act == 1:
        m = ends[rng.integers(0, ends.shape[0])]
    else:
        u = rng.integers(0, n)
        m = indices[indptr[u] + rng.integers(0, deg[u])]
    activations[m] += 1
    if states[m] == 1:
        if rng.random() < delta:
            states[m] = 0
            inf[cls[m]] -= 1
    else:
        a = 0
        for i in range(deg[m]):
            if unbiased:
                x = rng.integers(0, n)
                while not allow_self and x == m:
                    x = rng.integers(0, n)
            else:
                x = indices[indptr[m] + i]
            if rule == 1:
                x = indices[indptr[x] + rng.integers(0, deg[x])]
            a += states[x]
        if a > 0 and rng.random() < nu * a / D:
            states[m] = 1
            inf[cls[m]] += 1


@njit(cache=True)
def _sis_kernel(indptr, indices, deg, ends, cls, states, inf, ticks, record_every,
                nu, delta, D, act, rule, unbiased, allow_self, rng, out, activations):
    for t in range(ticks):
        _sis_tick(indptr, indices, deg, ends, cls, states, inf, nu, delta, D, act, rule,
                  unbiased, allow_self, rng, activations)
        if (t + 1) % record_every == 0:
            out[(t + 1) // record_every] = inf


def _run(g: Graph, cfg: SisConfig, states, ticks, record_every, rng):
    if ticks < 0:
        raise ValueError("steps must be >= 0")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    if not cfg.allow_self and NEIGHBOR_MODES[cfg.neighbor_mode] == 1 and g.n < 2:
        raise ValueError("need at least two nodes when self-observation is excluded")
    D = cfg.resolve_D(g)
    ks, cls = np.unique(g.degrees, return_inverse=True)
    states = np.asarray(states, dtype=np.int8).copy()
    inf = np.bincount(cls, weights=states, minlength=len(ks)).astype(np.int64)
    out = np.empty((ticks // record_every + 1, len(ks)), dtype=np.int64)
    out[0] = inf
    activations = np.zeros(g.n, dtype=np.int64)
    _sis_kernel(g.indptr, g.indices, g.degrees, g.edge_ends[0], cls.astype(np.int64),
                states, inf, int(ticks), int(record_every), float(cfg.nu),
                float(cfg.delta), float(D), ACTIVATIONS[cfg.activation], RULES[cfg.rule],
                bool(NEIGHBOR_MODES[cfg.neighbor_mode]), bool(cfg.allow_self), rng,
                out, activations)
    return states, out, activations


def sis_step(node_states, g: Graph, cfg: SisConfig, rng) -> np.ndarray:
    """One tick of the chain; returns a new state vector."""
    states, _, _ = _run(g, cfg, node_states, 1, 1, _as_rng(rng))
    return states


@dataclass
class Trajectory:
    """Recorded per-class infected counts at ``ticks``."""

    ks: np.ndarray
    counts: np.ndarray
    ticks: np.ndarray
    infected: np.ndarray
    final_states: np.ndarray
    activations: np.ndarray
    config: SisConfig | None = None
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

    def to_csv(self, path) -> None:
        header = {"config": asdict(self.config) if self.config else None,
                  "seed": self.seed, **self.meta}
        x = self.x
        with open(path, "w") as fh:
            fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
            fh.write("sweep,k,x_k\n")
            for i, sw in enumerate(self.sweeps):
                for j, k in enumerate(self.ks):
                    fh.write(f"{sw:.12g},{int(k)},{x[i, j]:.12g}\n")


def simulate(g: Graph, cfg: SisConfig, steps: int, seed=None, record_every: int = 1,
             initial=None) -> Trajectory:
    """Run ``steps`` ticks from the graph labels (or ``initial``).

    The census is recorded at tick 0 and every ``record_every`` ticks, so
    ``record_every=1`` gives steps + 1 states.
    """
    rng = _as_rng(seed)
    init = g.labels if initial is None else initial
    states, out, act = _run(g, cfg, init, steps, record_every, rng)
    ks, counts = np.unique(g.degrees, return_counts=True)
    ticks = np.arange(out.shape[0], dtype=np.int64) * record_every
    return Trajectory(ks=ks, counts=counts, ticks=ticks, infected=out,
                      final_states=states, activations=act, config=cfg,
                      seed=int(seed) if isinstance(seed, (int, np.integer)) else None)
