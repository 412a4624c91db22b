"""Polling estimators of the infected fraction and their Monte-Carlo MSE.

Four estimators are provided, all sampling with replacement:

* intent: average of b uniform nodes' own labels;
* UN: average neighborhood response q(s) of b uniform nodes;
* RW: average q of the endpoints of b random walks of length N;
* FN: average q of a uniform friend of each of b uniform nodes.

q(s) is the fraction of s's neighbors that are infected.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, GraphError, _as_rng
from .sampling import random_walks, sample_friend_of_random_node

ESTIMATORS = ("intent", "UN", "RW", "FN")
_ALIASES = {"intent": "intent", "I": "intent", "UN": "UN", "uniform": "UN",
            "RW": "RW", "random-walk": "RW", "FN": "FN", "friend-of-node": "FN"}


def _estimator_tag(name: str) -> str:
    if name not in _ALIASES:
        raise ValueError(f"unknown estimator {name!r}; expected one of {ESTIMATORS}")
    return _ALIASES[name]


@dataclass(frozen=True)
class PollResult:
    estimate: float
    estimator: str
    b: int
    N: int | None = None
    seed: object = None


def nep_responses(g: Graph) -> np.ndarray:
    """q(s) for every node s."""
    lab = g.labels.astype(float)
    return np.add.reduceat(lab[g.indices], g.indptr[:-1]) / g.degrees


def nep_response(g: Graph, s: int) -> float:
    return float(g.labels[g.neighbors(s)].mean())


def _check_budget(b):
    if int(b) != b or b < 1:
        raise ValueError(f"budget must be a positive integer, got {b}")
    return int(b)


def intent_poll(g: Graph, b: int, seed=None) -> PollResult:
    b = _check_budget(b)
    rng = _as_rng(seed)
    nodes = rng.integers(0, g.n, size=b)
    return PollResult(float(g.labels[nodes].mean()), "intent", b, seed=seed)


def nep_uniform(g: Graph, b: int, seed=None, responses=None) -> PollResult:
    b = _check_budget(b)
    rng = _as_rng(seed)
    q = nep_responses(g) if responses is None else responses
    nodes = rng.integers(0, g.n, size=b)
    return PollResult(float(q[nodes].mean()), "UN", b, seed=seed)


def nep_random_walk(g: Graph, b: int, N: int = 1000, seed=None, lazy: bool = False,
                    responses=None) -> PollResult:
    """Walks start at b uniform nodes and run N steps each.

    Use ``lazy=True`` on bipartite graphs, where the simple walk is periodic.
    """
    b = _check_budget(b)
    if N < 0:
        raise ValueError("N must be >= 0")
    if not g.is_connected:
        raise GraphError("random-walk polling needs a connected graph")
    rng = _as_rng(seed)
    q = nep_responses(g) if responses is None else responses
    starts = rng.integers(0, g.n, size=b)
    ends = random_walks(g, starts, N, rng, lazy=lazy)
    return PollResult(float(q[ends].mean()), "RW", b, N=N, seed=seed)


def nep_friend_of_node(g: Graph, b: int, seed=None, responses=None) -> PollResult:
    b = _check_budget(b)
    rng = _as_rng(seed)
    q = nep_responses(g) if responses is None else responses
    nodes = sample_friend_of_random_node(g, rng, size=b)
    return PollResult(float(q[nodes].mean()), "FN", b, seed=seed)


# ---------------------------------------------------------------- census formulas

@dataclass(frozen=True)
class BiasResult:
    value: float
    friend_minus_node: float
    cov_over_mean_degree: float


def exact_bias_rw(g: Graph, atol: float = 1e-12) -> BiasResult:
    """Limit (N -> inf) bias of the RW estimator, by two census routes.

    E[s(Y)] - E[s(X)] and cov(s(X), d(X)) / E[d(X)] must agree.
    """
    s = g.labels.astype(float)
    d = g.degrees.astype(float)
    u, v = g.edge_ends
    first = s[v].mean() - s.mean()
    second = ((s * d).mean() - s.mean() * d.mean()) / d.mean()
    if abs(first - second) > atol:
        raise ArithmeticError(f"bias forms disagree: {first!r} vs {second!r}")
    return BiasResult(float(first), float(first), float(second))


def exact_var_rw(g: Graph, b: int) -> float:
    """(1/b) cov(s(Y), q(U)) over a uniform directed edge (U, Y)."""
    b = _check_budget(b)
    q = nep_responses(g)
    u, v = g.edge_ends
    sy = g.labels[v].astype(float)
    qu = q[u]
    return float(((sy * qu).mean() - sy.mean() * qu.mean()) / b)


def single_response_law(g: Graph, estimator: str) -> tuple[np.ndarray, np.ndarray]:
    """Values and probabilities of one response term of an estimator.

    For RW this is the stationary (N -> inf) law.
    """
    tag = _estimator_tag(estimator)
    if tag == "intent":
        return g.labels.astype(float), np.full(g.n, 1.0 / g.n)
    q = nep_responses(g)
    if tag == "UN":
        return q, np.full(g.n, 1.0 / g.n)
    if tag == "RW":
        return q, g.degrees / g.degrees.sum()
    u, v = g.edge_ends
    return q, np.bincount(v, weights=1.0 / (g.n * g.degrees[u]), minlength=g.n)


def exact_mse(g: Graph, estimator: str, b: int) -> tuple[float, float, float]:
    """(mse, bias, var) of an estimator by census; RW in the N -> inf limit."""
    b = _check_budget(b)
    vals, p = single_response_law(g, estimator)
    mean = vals @ p
    var = ((vals - mean) ** 2) @ p / b
    bias = mean - g.labels.mean()
    return float(bias ** 2 + var), float(bias), float(var)


@dataclass(frozen=True)
class SmallBudgetResult:
    holds: bool | None
    low_fraction_branch: bool | None
    high_fraction_branch: bool | None
    mean_degree_infected: float
    mean_degree_susceptible: float
    true_fraction: float
    bias_rw: float


def small_budget_condition(g: Graph) -> SmallBudgetResult:
    """Sufficient conditions for RW (b=1, N -> inf) to beat intent polling.

    Either E[d | s=1] <= E[d | s=0] with fraction <= 1/2, or
    E[d | s=1] >= E[d | s=0] with fraction >= 1/2. Indeterminate (None)
    when one label class is empty.
    """
    s = g.labels.astype(bool)
    rho = float(s.mean())
    bias = exact_bias_rw(g).value
    if s.all() or not s.any():
        return SmallBudgetResult(None, None, None, float("nan"), float("nan"), rho, bias)
    d1 = float(g.degrees[s].mean())
    d0 = float(g.degrees[~s].mean())
    low = d1 <= d0 and rho <= 0.5
    high = d1 >= d0 and rho >= 0.5
    return SmallBudgetResult(low or high, low, high, d1, d0, rho, bias)


# ---------------------------------------------------------------- experiments

@dataclass(frozen=True)
class MseRow:
    estimator: str
    budget: int
    mse: float
    bias: float
    var: float
    trials: int
    mse_se: float


@dataclass
class MseTable:
    rows: list[MseRow]
    true_fraction: float
    graph_id: str = ""
    alpha_or_model: str = ""
    r_kk: float = float("nan")
    p_ks: float = float("nan")
    estimates: dict = field(default_factory=dict, repr=False)

    def row(self, estimator: str, budget: int) -> MseRow:
        tag = _estimator_tag(estimator)
        for r in self.rows:
            if r.estimator == tag and r.budget == budget:
                return r
        raise KeyError((estimator, budget))

    def to_csv(self, path, append: bool = False) -> None:
        with open(path, "a" if append else "w", newline="") as fh:
            w = csv.writer(fh)
            if not append:
                w.writerow(["graph_id", "alpha_or_model", "r_kk", "p_ks", "estimator",
                            "budget", "mse", "bias", "var", "trials", "mse_se"])
            for r in self.rows:
                w.writerow([self.graph_id, self.alpha_or_model, f"{self.r_kk:.6g}",
                            f"{self.p_ks:.6g}", r.estimator, r.budget, f"{r.mse:.10g}",
                            f"{r.bias:.10g}", f"{r.var:.10g}", r.trials, f"{r.mse_se:.10g}"])


def trial_seed(seed, estimator_index: int, budget: int, trial: int, paired: bool = False):
    """Independent stream per (estimator, budget, trial).

    In paired mode the estimator index is dropped, so every estimator sees the
    same stream for a given (budget, trial).
    """
    key = (budget, trial) if paired else (estimator_index, budget, trial)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def mse_experiment(g: Graph, estimators, budgets, trials: int, seed=0, N: int = 1000,
                   lazy: bool = False, paired: bool = False, keep_estimates: bool = False,
                   graph_id: str = "", alpha_or_model: str = "") -> MseTable:
    """Empirical MSE, bias and variance of each estimator at each budget."""
    if trials < 100:
        raise ValueError("trials must be >= 100")
    from .graph import degree_stats

    tags = [_estimator_tag(e) for e in estimators]
    q = nep_responses(g)
    truth = float(g.labels.mean())
    if "RW" in tags and not g.is_connected:
        raise GraphError("random-walk polling needs a connected graph")
    rows = []
    kept = {}
    for ei, tag in enumerate(tags):
        idx = ESTIMATORS.index(tag)
        for b in budgets:
            b = _check_budget(b)
            est = np.empty(trials)
            for t in range(trials):
                rng = trial_seed(seed, idx, b, t, paired)
                if tag == "intent":
                    est[t] = intent_poll(g, b, rng).estimate
                elif tag == "UN":
                    est[t] = nep_uniform(g, b, rng, q).estimate
                elif tag == "RW":
                    starts = rng.integers(0, g.n, size=b)
                    est[t] = q[random_walks(g, starts, N, rng, lazy)].mean()
                else:
                    est[t] = nep_friend_of_node(g, b, rng, q).estimate
            err2 = (est - truth) ** 2
            rows.append(MseRow(tag, b, float(err2.mean()), float(est.mean() - truth),
                               float(est.var()), trials,
                               float(err2.std(ddof=1) / np.sqrt(trials))))
            if keep_estimates:
                kept[(tag, b)] = est
    stats = degree_stats(g)
    return MseTable(rows=rows, true_fraction=truth, graph_id=graph_id,
                    alpha_or_model=alpha_or_model, r_kk=stats.r_kk, p_ks=stats.p_ks,
                    estimates=kept)
