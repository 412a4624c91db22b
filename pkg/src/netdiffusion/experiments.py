"""Figure-level experiments driven by an :class:`ExperimentConfig`.

Every experiment is split into independent panel jobs. Jobs only compute and
return rows; the caller writes files in panel order, so output bytes do not
depend on the number of worker processes.

Seed layout: ``child_seed(base, kind, panel, trial)``. Panel 0 holds the
base graph (trial 0) and its labels (trial 1). Panels 1, 2, ... are the
output panels; within a panel trial 0 seeds the rewiring, trial 1 the labels
and trial 2 + s the s-th Monte-Carlo replica.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, child_seed
from .graph import (
    Graph,
    assign_labels,
    configuration_model,
    degree_stats,
    generate_configuration_model,
    generate_erdos_renyi,
    largest_component,
    rewire_to_assortativity,
)
from .meanfield import MfdParams, critical_threshold, stationary_state
from .polling import mse_experiment
from .reactive import LogisticKernel, ReactiveNetwork, constrained_ode_trajectory, simulate_joint
from .sampling import verify_friendship_paradox
from .sis import SisConfig
from .svg import Panel, render
from .tracking import ObservationPlan, track


@dataclass
class Artifact:
    """One output file held in memory until the writer flushes it."""

    name: str
    text: str


@dataclass
class PanelOutput:
    artifacts: list = field(default_factory=list)

    def csv(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        self.artifacts.append(Artifact(name, buf.getvalue()))

    def svg(self, name, panels, cols=None):
        self.artifacts.append(Artifact(name, render(panels, cols)))


def _g(v: float) -> str:
    return f"{v:.10g}"


# ---------------------------------------------------------------- graphs

def build_base_graph(cfg: ExperimentConfig) -> Graph:
    gs = cfg.graph
    seed = child_seed(cfg.seed, cfg.kind, 0, 0)
    if gs.model == "power-law":
        g = generate_configuration_model(gs.n, gs.alpha, gs.d_min, gs.d_max, seed=seed)
    elif gs.model == "erdos-renyi":
        g = generate_erdos_renyi(gs.n, gs.avg_degree, seed=seed)
    else:
        counts = np.floor(np.asarray(gs.fractions) * gs.n).astype(int)
        counts[-1] = gs.n - counts[:-1].sum()
        deg = np.repeat(gs.degrees, counts)
        if deg.sum() % 2:
            deg[np.argmin(deg)] += 1
        g = configuration_model(deg, seed=seed)
    return g


def _model_tag(cfg: ExperimentConfig) -> str:
    gs = cfg.graph
    if gs.model == "power-law":
        return f"power-law alpha={gs.alpha:g}"
    if gs.model == "erdos-renyi":
        return f"erdos-renyi avg_degree={gs.avg_degree:g}"
    return "degree-classes " + "/".join(str(d) for d in gs.degrees)


def panel_graph(cfg: ExperimentConfig, base: Graph, panel: int, r_kk: float | None,
                p_ks: float | None, lcc: bool = False) -> Graph:
    """Rewire the base graph (on its largest component if ``lcc``), then label."""
    g = base
    if lcc:
        g = largest_component(g)
    if r_kk is not None:
        rng = np.random.default_rng(child_seed(cfg.seed, cfg.kind, panel, 0))
        # rewiring can disconnect the graph; re-target on the component a few times
        for _ in range(3):
            g = rewire_to_assortativity(g, r_kk, tol=cfg.graph.rewire_tol, seed=rng).graph
            if not lcc:
                break
            g = largest_component(g)
            if abs(degree_stats(g).r_kk - r_kk) <= cfg.graph.rewire_tol:
                break
    if p_ks is not None:
        g = assign_labels(g, cfg.graph.rho0, p_ks,
                          seed=child_seed(cfg.seed, cfg.kind, panel, 1)).graph
    return g


def _targets(cfg):
    return cfg.graph.r_kk if cfg.graph.r_kk else [None]


# ---------------------------------------------------------------- paradox-cdfs

def _paradox_job(cfg, base, i, r):
    g = panel_graph(cfg, base, i + 1, r, None)
    rep = verify_friendship_paradox(g)
    st = degree_stats(g)
    rows = [[int(k), _g(a), _g(b), _g(c)]
            for k, a, b, c in zip(rep.ks, rep.cdf_dX, rep.cdf_dY, rep.cdf_dZ)]
    summary = [i, _g(st.r_kk), _g(rep.mean_dX), _g(rep.mean_dY), _g(rep.mean_dZ),
               int(rep.fosd_ZX_holds)]
    return rows, summary, (rep.ks, rep.cdf_dX, rep.cdf_dY, rep.cdf_dZ, st.r_kk)


def run_paradox(cfg, pool_map):
    base = build_base_graph(cfg)
    targets = _targets(cfg)
    res = pool_map(_paradox_job, [(cfg, base, i, r) for i, r in enumerate(targets)])
    out = PanelOutput()
    panels = []
    for i, (rows, _, (ks, fx, fy, fz, r)) in enumerate(res):
        tag = "base" if targets[i] is None else f"rkk{targets[i]:+.2f}"
        out.csv(f"paradox_cdfs_{i}_{tag}.csv", ["degree", "cdf_X", "cdf_Y", "cdf_Z"], rows)
        panels.append(Panel(f"r_kk = {r:.2f}", "degree k", "CDF", logx=True,
                            legend="lower right")
                      .add("d(X)", ks, fx, step=True).add("d(Y)", ks, fy, step=True)
                      .add("d(Z)", ks, fz, step=True))
    out.csv("paradox_summary.csv", ["panel", "r_kk", "mean_dX", "mean_dY", "mean_dZ",
                                    "fosd_Z_over_X"], [s for _, s, _ in res])
    out.svg("paradox_cdfs.svg", panels)
    return out


# ---------------------------------------------------------------- bifurcation

def _bifurcation_job(cfg, base, i, r):
    g = panel_graph(cfg, base, i + 1, r, None)
    st = degree_stats(g)
    d = cfg.dynamics
    grid = np.linspace(d.lambda_min, d.lambda_max, d.lambda_points)
    rx = [stationary_state(st, lam, "non-monophilic").rho for lam in grid]
    rz = [stationary_state(st, lam, "monophilic").rho for lam in grid]
    tx = critical_threshold(st, "non-monophilic").lambda_star
    tz = critical_threshold(st, "monophilic").lambda_star
    rows = [[_g(l), _g(a), _g(b)] for l, a, b in zip(grid, rx, rz)]
    return rows, [i, _g(st.r_kk), _g(tx), _g(tz)], (grid, rx, rz, st.r_kk)


def run_bifurcation(cfg, pool_map):
    base = build_base_graph(cfg)
    targets = _targets(cfg)
    res = pool_map(_bifurcation_job, [(cfg, base, i, r) for i, r in enumerate(targets)])
    out = PanelOutput()
    panels = []
    for i, (rows, _, (grid, rx, rz, r)) in enumerate(res):
        tag = "base" if targets[i] is None else f"rkk{targets[i]:+.2f}"
        out.csv(f"bifurcation_{i}_{tag}.csv",
                ["lambda", "rho_non_monophilic", "rho_monophilic"], rows)
        panels.append(Panel(f"r_kk = {r:.2f}", "lambda", "stationary fraction")
                      .add("non-monophilic", grid, rx).add("monophilic", grid, rz))
    out.csv("bifurcation_thresholds.csv",
            ["panel", "r_kk", "lambda_star_non_monophilic", "lambda_star_monophilic"],
            [s for _, s, _ in res])
    out.svg("bifurcation.svg", panels)
    return out


# ---------------------------------------------------------------- mse-grid

def _mse_job(cfg, base, idx, r, p):
    pol = cfg.polling
    g = panel_graph(cfg, base, idx + 1, r, p, lcc="RW" in pol.estimators)
    table = mse_experiment(g, pol.estimators, pol.budgets, pol.trials,
                           seed=child_seed(cfg.seed, cfg.kind, idx + 1, 2), N=pol.N,
                           lazy=pol.lazy, paired=pol.paired, graph_id=f"panel{idx}",
                           alpha_or_model=_model_tag(cfg))
    return table


def run_mse_grid(cfg, pool_map):
    base = build_base_graph(cfg)
    cells = [(r, p) for r in _targets(cfg) for p in cfg.graph.p_ks]
    tables = pool_map(_mse_job, [(cfg, base, i, r, p) for i, (r, p) in enumerate(cells)])
    out = PanelOutput()
    header = ["graph_id", "alpha_or_model", "r_kk", "p_ks", "estimator", "budget", "mse",
              "bias", "var", "trials", "mse_se"]
    for i, t in enumerate(tables):
        rows = [[t.graph_id, t.alpha_or_model, f"{t.r_kk:.6g}", f"{t.p_ks:.6g}",
                 row.estimator, row.budget, _g(row.mse), _g(row.bias), _g(row.var),
                 row.trials, _g(row.mse_se)] for row in t.rows]
        out.csv(f"mse_panel{i}.csv", header, rows)
        panel = Panel(f"r_kk = {t.r_kk:.2f}, p_ks = {t.p_ks:.2f}", "budget b", "MSE",
                      logx=True, logy=True)
        for est in cfg.polling.estimators:
            rs = [row for row in t.rows if row.estimator == est]
            panel.add(est, [row.budget for row in rs], [row.mse for row in rs], markers=True)
        out.svg(f"mse_panel{i}.svg", [panel])
    return out


# ---------------------------------------------------------------- reactive-compare

def _reactive_network(cfg, base):
    labeled = assign_labels(base, cfg.graph.rho0, cfg.graph.p_ks[0],
                            seed=child_seed(cfg.seed, cfg.kind, 0, 1)).graph
    fam = [panel_graph(cfg, labeled, i + 1, r, None)
           for i, r in enumerate(cfg.reactive.targets)]
    rc = cfg.reactive
    kernel = LogisticKernel(np.array(rc.P_low), np.array(rc.P_high), rc.c, rc.rho0)
    return ReactiveNetwork(fam, kernel)


def _reactive_sim_job(cfg, rn, s):
    d = cfg.dynamics
    sis = SisConfig(d.nu, d.delta, d.activation, d.rule, d.neighbor_mode)
    M = rn.graphs[0].n
    tr = simulate_joint(rn, sis, 0, int(round(d.sweeps * M)),
                        seed=child_seed(cfg.seed, cfg.kind, 1, 2 + s), record_every=M)
    return tr.x, tr.graph_index, tr.sweeps


def run_reactive(cfg, pool_map):
    base = build_base_graph(cfg)
    rn = _reactive_network(cfg, base)
    d = cfg.dynamics
    st = rn.stats[0]
    ode = constrained_ode_trajectory(rn, MfdParams(d.nu, d.delta, st, rule="monophilic"),
                                     st.population_state, d.sweeps)
    sims = pool_map(_reactive_sim_job, [(cfg, rn, s) for s in range(cfg.reactive.seeds)])
    out = PanelOutput()
    N = rn.size
    out.csv("reactive_ode.csv", ["sweep", "k", "x_k"] + [f"pi_{i}" for i in range(N)]
            + ["residual"],
            [[_g(sw), int(k), _g(ode.x[t, j])] + [_g(v) for v in ode.pi[t]]
             + [f"{ode.residual[t]:.3e}"]
             for t, sw in enumerate(ode.sweeps) for j, k in enumerate(rn.ks)])
    rows, gaps = [], []
    for s, (x, gi, sweeps) in enumerate(sims):
        n = min(len(x), len(ode.x))
        gaps.append([s, _g(float(np.abs(x[:n] - ode.x[:n]).max()))])
        rows += [[s, _g(sw), int(gi[t]), int(k), _g(x[t, j])]
                 for t, sw in enumerate(sweeps) for j, k in enumerate(rn.ks)]
    out.csv("reactive_joint.csv", ["seed", "sweep", "graph", "k", "x_k"], rows)
    out.csv("reactive_gaps.csv", ["seed", "sup_gap"], gaps)
    panel = Panel("ODE vs joint simulation", "sweep", "infected fraction",
                  legend="lower right")
    for s, (x, _, sweeps) in enumerate(sims[:5]):
        panel.add(f"sim seed {s}", sweeps, x @ st.P)
    panel.add("ODE", ode.sweeps, ode.rho(st.P))
    out.svg("reactive_compare.svg", [panel])
    return out


# ---------------------------------------------------------------- tracking

def _tracking_job(cfg, g, s):
    d, tk = cfg.dynamics, cfg.tracking
    sis = SisConfig(d.nu, d.delta, d.activation, d.rule, d.neighbor_mode)
    plan = ObservationPlan(tk.samples, tk.mode, tk.chain_length)
    res = track(g, sis, plan, int(round(d.sweeps)), seed=child_seed(cfg.seed, cfg.kind, 1, 2 + s),
                q_scale=tk.q_scale, substeps=tk.substeps, prior_var=tk.prior_var,
                q_kind=tk.q_kind)
    summary = [s, _g(res.rmse()), _g(res.rmse("observation")), _g(res.rmse("open_loop")),
               _g(res.nis_ratio())]
    return summary, res


def run_tracking(cfg, pool_map):
    base = build_base_graph(cfg)
    g = assign_labels(base, cfg.graph.rho0, cfg.graph.p_ks[0],
                      seed=child_seed(cfg.seed, cfg.kind, 0, 1)).graph
    res = pool_map(_tracking_job, [(cfg, g, s) for s in range(cfg.tracking.seeds)])
    out = PanelOutput()
    out.csv("tracking_summary.csv", ["seed", "rmse_filtered", "rmse_observation",
                                     "rmse_open_loop", "nis_ratio"], [s for s, _ in res])
    rows = []
    for s, (_, r) in enumerate(res):
        for t in range(r.truth.shape[0]):
            for j, k in enumerate(r.ks):
                rows.append([s, t, int(k), _g(r.truth[t, j]), _g(r.observation[t, j]),
                             _g(r.filtered_mean[t, j]), _g(r.filtered_std[t, j])])
    out.csv("tracking_states.csv", ["seed", "sweep", "k", "truth", "observation",
                                    "filtered_mean", "filtered_std"], rows)
    r = res[0][1]
    t = np.arange(r.truth.shape[0])
    panel = (Panel("seed 0: infected fraction", "sweep", "fraction", legend="lower right")
             .add("truth", t, r.truth @ r.P).add("filtered", t, np.clip(r.filtered_mean, 0, 1) @ r.P)
             .add("observation", t, np.nan_to_num(r.observation) @ r.P)
             .add("prediction only", t, np.clip(r.open_loop_mean, 0, 1) @ r.P))
    out.svg("tracking.svg", [panel])
    return out


RUNNERS = {
    "paradox-cdfs": run_paradox,
    "bifurcation": run_bifurcation,
    "mse-grid": run_mse_grid,
    "reactive-compare": run_reactive,
    "tracking": run_tracking,
}


def _call(args):
    fn, a = args
    return fn(*a)


def make_pool_map(threads: int):
    """Ordered map over (fn, args) jobs, in-process or in a process pool."""
    if threads <= 1:
        return lambda fn, jobs: [fn(*a) for a in jobs]

    def pool_map(fn, jobs):
        with ProcessPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(_call, [(fn, a) for a in jobs]))

    return pool_map


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> PanelOutput:
    return RUNNERS[cfg.kind](cfg, make_pool_map(threads))
