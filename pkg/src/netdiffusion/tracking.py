"""Bayesian tracking of the per-degree infected state from noisy polls.

The mean-field map is quadratic in x, so for a Gaussian prior the predicted
mean and covariance are available in closed form (Isserlis' theorem for the
fourth moments). Observations are per-class sample fractions, y = C x + v.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, _as_rng, degree_stats
from .meanfield import MfdParams, NumericalError
from .sampling import rds_chain
from .sis import SisConfig, simulate


@dataclass(frozen=True)
class PolynomialDynamics:
    """f_r(x) = A0[r] + A1[r] @ x + x @ A2[r] @ x."""

    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray

    def __post_init__(self):
        K = len(self.A0)
        if self.A1.shape != (K, K) or self.A2.shape != (K, K, K):
            raise ValueError("tensor shapes do not match the state dimension")

    @property
    def dim(self) -> int:
        return len(self.A0)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.A0 + self.A1 @ x + np.einsum("rjl,j,l->r", self.A2, x, x)

    def maps_unit_box(self, n_random: int = 200, seed=0, atol: float = 1e-12) -> bool:
        """Check f([0,1]^K) within [0,1]^K on corners (K <= 12) and random points."""
        K = self.dim
        rng = _as_rng(seed)
        pts = [rng.random(K) for _ in range(n_random)]
        if K <= 12:
            corners = (np.arange(2 ** K)[:, None] >> np.arange(K)) & 1
            pts.extend(corners.astype(float))
        for x in pts:
            y = self(x)
            if np.any(y < -atol) or np.any(y > 1 + atol):
                return False
        return True


def build_dynamics(stats, params: MfdParams, ticks: float = 1.0) -> PolynomialDynamics:
    """Quadratic form of ``ticks`` mean-field ticks taken as one step.

    With a_k = ticks * c_k / M:
    A1[k, j] = [k == j] (1 - a_k delta) + a_k nu k w_j / D and
    A2[k, k, j] = -a_k nu k w_j / D.
    """
    if stats is None:
        stats = params.stats
    ks = stats.ks.astype(float)
    K = len(ks)
    a = ticks * params.multipliers / params.size
    w = params.weights
    gain = (a * params.nu * ks / params.max_degree)[:, None] * w[None, :]
    A1 = np.diag(1.0 - a * params.delta) + gain
    A2 = np.zeros((K, K, K))
    A2[np.arange(K), np.arange(K), :] = -gain
    return PolynomialDynamics(np.zeros(K), A1, A2)


def gaussian_quadratic_moments(mean, cov, dyn: PolynomialDynamics):
    """E[f(x)] and E[f(x) f(x)'] for x ~ N(mean, cov), in closed form."""
    mu = np.asarray(mean, dtype=float)
    sig = np.asarray(cov, dtype=float)
    S = 0.5 * (dyn.A2 + dyn.A2.transpose(0, 2, 1))
    c = dyn(mu)
    L = dyn.A1 + 2.0 * np.einsum("rjl,l->rj", S, mu)
    SS = S @ sig
    tr = np.einsum("rjj->r", SS)
    ef = c + tr
    K = len(mu)
    # sum_jm SS[r, j, m] SS[s, m, j] = tr(S_r sig S_s sig)
    cross = SS.reshape(K, K * K) @ SS.transpose(0, 2, 1).reshape(K, K * K).T
    cov_f = L @ sig @ L.T + 2.0 * cross
    eff = cov_f + np.outer(ef, ef)
    return ef, eff


@dataclass(frozen=True)
class FilterState:
    mean: np.ndarray
    cov: np.ndarray


def _psd(cov, tol=1e-8, scale=None):
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    ref = max(1.0, float(np.abs(vals).max())) if scale is None else scale
    if vals.min() < -tol * ref:
        raise NumericalError(f"covariance has eigenvalue {vals.min():.3g} below -{tol:g}")
    if vals.min() < 0:
        cov = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
        cov = 0.5 * (cov + cov.T)
    return cov


def predict(state: FilterState, dyn: PolynomialDynamics, Q) -> FilterState:
    ef, eff = gaussian_quadratic_moments(state.mean, state.cov, dyn)
    cov = eff - np.outer(ef, ef) + np.asarray(Q, dtype=float)
    return FilterState(ef, _psd(cov))


def predict_linear(state: FilterState, dyn: PolynomialDynamics, Q) -> FilterState:
    """Predictor for A2 = 0 without forming second moments."""
    mean = dyn.A0 + dyn.A1 @ state.mean
    return FilterState(mean, _psd(dyn.A1 @ state.cov @ dyn.A1.T + Q))


def innovation(prior: FilterState, y, C, R):
    """Innovation, its covariance and the normalized innovation squared."""
    C = np.atleast_2d(C)
    nu = np.asarray(y, dtype=float) - C @ prior.mean
    S = C @ prior.cov @ C.T + np.asarray(R, dtype=float)
    nis = float(nu @ np.linalg.solve(S, nu))
    return nu, S, nis


def update(prior: FilterState, y, C, R) -> FilterState:
    """Kalman gain update with the Joseph-form covariance."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    H = prior.cov
    S = C @ H @ C.T + R
    if not np.all(np.isfinite(S)) or np.linalg.cond(S) > 1e14:
        raise NumericalError("innovation covariance is singular")
    K = np.linalg.solve(S, C @ H).T
    mean = prior.mean + K @ (np.asarray(y, dtype=float) - C @ prior.mean)
    IKC = np.eye(len(prior.mean)) - K @ C
    cov = IKC @ H @ IKC.T + K @ R @ K.T
    return FilterState(mean, _psd(cov))


# ---------------------------------------------------------------- observations

@dataclass(frozen=True)
class ObservationPlan:
    """How each degree class is polled.

    ``samples`` is nu(k), one count per degree class (or a single int for
    all classes). ``mode`` is "uniform" (with-replacement draws inside each
    class), "rds" (one recruitment chain of ``chain_length`` over the whole
    graph, split by class) or "census" (exact fractions).
    """

    samples: object = 50
    mode: str = "uniform"
    chain_length: int = 10_000
    rds_weights: np.ndarray | None = None
    eps: float = 1e-4
    census_noise: float = 1e-10

    def __post_init__(self):
        if self.mode not in ("uniform", "rds", "census"):
            raise ValueError(f"unknown observation mode {self.mode!r}")
        if np.any(np.asarray(self.samples) < 1):
            raise ValueError("every tracked class needs at least one sample")
        if self.mode == "rds" and self.chain_length < 1:
            raise ValueError("chain_length must be >= 1")

    def counts(self, n_classes: int) -> np.ndarray:
        s = np.asarray(self.samples, dtype=np.int64)
        if s.ndim == 0:
            return np.full(n_classes, int(s))
        if s.shape != (n_classes,):
            raise ValueError("samples must give one count per degree class")
        return s


def observe(g: Graph, plan: ObservationPlan, seed=None, prior_mean=None, states=None):
    """Return (y, C, R, observed class indices) for the current node states."""
    rng = _as_rng(seed)
    s = g.labels if states is None else np.asarray(states)
    ks, cls = np.unique(g.degrees, return_inverse=True)
    K = len(ks)
    order = np.argsort(cls, kind="stable")
    bounds = np.concatenate([[0], np.cumsum(np.bincount(cls, minlength=K))])
    p_ref = None if prior_mean is None else np.clip(prior_mean, 0.0, 1.0)
    if plan.mode == "census":
        y = np.bincount(cls, weights=s, minlength=K) / np.diff(bounds)
        return y, np.eye(K), plan.census_noise * np.eye(K), np.arange(K)
    if plan.mode == "uniform":
        nk = plan.counts(K)
        y = np.empty(K)
        for k in range(K):
            members = order[bounds[k]:bounds[k + 1]]
            y[k] = s[members[rng.integers(0, len(members), size=nk[k])]].mean()
        obs = np.arange(K)
    else:
        chain, pi = rds_chain(g.with_labels(s), plan.chain_length, rng, plan.rds_weights)
        c = cls[chain]
        inv = 1.0 / pi[chain]
        wsum = np.bincount(c, weights=inv, minlength=K)
        hit = np.bincount(c, minlength=K)
        obs = np.flatnonzero(hit > 0)
        y_all = np.bincount(c, weights=s[chain] * inv, minlength=K)
        y = y_all[obs] / wsum[obs]
        nk = hit[obs]
    p = y if p_ref is None else p_ref[obs]
    R = np.diag(np.maximum(p * (1 - p), plan.eps) / nk)
    return y, np.eye(K)[obs], R, obs


# ---------------------------------------------------------------- tracking loop

def process_noise(n_classes: int, M: float, ticks: float, scale: float = 1.0) -> np.ndarray:
    """Diagonal Q for ``ticks`` ticks: scale / M^2 per tick and class."""
    return np.eye(n_classes) * scale * ticks / M ** 2


def census_process_noise(params: MfdParams, x, ticks: float, scale: float = 1.0) -> np.ndarray:
    """Diagonal Q from the jump variance of the chain at state ``x``.

    Per tick, class k moves by 1/M(k) with probability P(k) c_k r_k(x), where
    r_k = (1 - x_k) nu k theta / D + delta x_k, giving variance
    c_k r_k / (M M(k)).
    """
    st = params.stats
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    theta = params.weights @ x
    rate = (1 - x) * params.nu * st.ks * theta / params.max_degree + params.delta * x
    return np.diag(scale * ticks * params.multipliers * rate / (params.size * st.counts))


@dataclass
class TrackResult:
    ks: np.ndarray
    P: np.ndarray
    truth: np.ndarray
    observation: np.ndarray
    filtered_mean: np.ndarray
    filtered_std: np.ndarray
    predicted_mean: np.ndarray
    open_loop_mean: np.ndarray
    nis: np.ndarray
    nis_dof: np.ndarray
    meta: dict = field(default_factory=dict)

    @staticmethod
    def _rmse(est, truth, P):
        err = np.where(np.isnan(est), np.nan, est - truth)
        return float(np.nanmean(np.sqrt(np.nansum(P * err ** 2, axis=1)
                                        / np.sum(P * ~np.isnan(err), axis=1))))

    def rmse(self, which: str = "filtered", skip: int = 1) -> float:
        """Time-average of the P(k)-weighted RMSE over sweeps >= ``skip``."""
        est = {"filtered": np.clip(self.filtered_mean, 0, 1),
               "observation": self.observation,
               "predicted": np.clip(self.predicted_mean, 0, 1),
               "open_loop": np.clip(self.open_loop_mean, 0, 1)}[which]
        return self._rmse(est[skip:], self.truth[skip:], self.P)

    def nis_ratio(self, skip: int = 1) -> float:
        return float(np.mean(self.nis[skip:]) / np.mean(self.nis_dof[skip:]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sweep", "k", "truth", "observation", "filtered_mean", "filtered_std"])
            mean = np.clip(self.filtered_mean, 0, 1)
            for t in range(self.truth.shape[0]):
                for j, k in enumerate(self.ks):
                    obs = self.observation[t, j]
                    w.writerow([t, int(k), f"{self.truth[t, j]:.10g}",
                                "" if np.isnan(obs) else f"{obs:.10g}",
                                f"{mean[t, j]:.10g}", f"{self.filtered_std[t, j]:.10g}"])


def track(g: Graph, cfg: SisConfig, plan: ObservationPlan, sweeps: int, seed=None,
          q_scale: float = 1.0, substeps: int = 10, prior_mean=None, prior_var: float = 0.05,
          use_updates: bool = True, q_kind: str = "uniform") -> TrackResult:
    """Simulate the SIS chain and filter its per-class state sweep by sweep.

    Each sweep runs M ticks of the chain, then ``substeps`` exact-moment
    predictions of M / substeps ticks each, then one observation and update.
    Sweep 0 is observed before any dynamics. For comparison, the sweep-0
    posterior mean is also pushed through the mean-field map with no further
    updates (the prediction-only baseline, ``open_loop_mean``).
    """
    ss = np.random.SeedSequence(seed)
    sim_seed, obs_seed = ss.spawn(2)
    sim_rng = np.random.default_rng(sim_seed)
    obs_rng = np.random.default_rng(obs_seed)
    stats = degree_stats(g)
    M = g.n
    K = len(stats.ks)
    params = MfdParams(cfg.nu, cfg.delta, stats, cfg.activation_code, cfg.rule, M=M,
                       D=cfg.resolve_D(g))
    ticks = M / substeps
    dyn = build_dynamics(stats, params, ticks)
    if q_kind not in ("uniform", "census"):
        raise ValueError(f"unknown q_kind {q_kind!r}")
    Q = process_noise(K, M, ticks, q_scale)
    m0 = np.full(K, float(stats.infected_fraction)) if prior_mean is None else prior_mean
    state = FilterState(np.asarray(m0, dtype=float), prior_var * np.eye(K))
    loop = state.mean
    states = g.labels.copy()
    shape = (sweeps + 1, K)
    truth, obs_log = np.empty(shape), np.full(shape, np.nan)
    filt, std, pred, openl = (np.empty(shape) for _ in range(4))
    nis, dof = np.empty(sweeps + 1), np.empty(sweeps + 1)
    for t in range(sweeps + 1):
        if t > 0:
            tr = simulate(g, cfg, M, sim_rng, record_every=M, initial=states)
            states = tr.final_states
            for _ in range(substeps):
                if q_kind == "census":
                    Q = census_process_noise(params, state.mean, ticks, q_scale)
                state = predict(state, dyn, Q)
                loop = dyn(loop)
        truth[t] = np.bincount(np.searchsorted(stats.ks, g.degrees), weights=states,
                               minlength=K) / stats.counts
        pred[t] = state.mean
        y, C, R, idx = observe(g, plan, obs_rng, state.mean, states)
        obs_log[t, idx] = y
        _, _, nis[t] = innovation(state, y, C, R)
        dof[t] = len(idx)
        if use_updates:
            state = update(state, y, C, R)
        if t == 0:
            loop = state.mean.copy()
        filt[t] = state.mean
        std[t] = np.sqrt(np.diag(state.cov))
        openl[t] = loop
    return TrackResult(stats.ks, stats.P, truth, obs_log, filt, std, pred, openl, nis, dof,
                       meta={"M": M, "substeps": substeps, "q_scale": q_scale, "q_kind": q_kind,
                             "mode": plan.mode})
