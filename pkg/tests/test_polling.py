import numpy as np
import pytest
from hypothesis import given, settings

from netdiffusion.graph import (
    Graph,
    GraphError,
    assign_labels,
    cycle_graph,
    path_graph,
    star_graph,
)
from netdiffusion.polling import (
    exact_bias_rw,
    exact_mse,
    exact_var_rw,
    intent_poll,
    mse_experiment,
    nep_friend_of_node,
    nep_random_walk,
    nep_response,
    nep_responses,
    nep_uniform,
    single_response_law,
    small_budget_condition,
    trial_seed,
)

from test_graph import small_graphs


def complete_bipartite(a, b, labels=None):
    edges = [(i, a + j) for i in range(a) for j in range(b)]
    return Graph.from_edges(a + b, edges, labels)


@pytest.fixture
def iid_labeled(powerlaw_lcc):
    rng = np.random.default_rng(12)
    return powerlaw_lcc.with_labels((rng.random(powerlaw_lcc.n) < 0.3).astype(np.int8))


class TestResponses:
    def test_p3(self, p3_hub):
        assert [nep_response(p3_hub, s) for s in range(3)] == [1.0, 0.0, 1.0]
        assert nep_responses(p3_hub).tolist() == [1.0, 0.0, 1.0]

    def test_all_infected(self):
        g = star_graph(5, labels=[1] * 6)
        assert np.all(nep_responses(g) == 1.0)

    def test_regular(self):
        lab = [1, 1, 0, 1, 0, 0, 0]
        g = cycle_graph(7, labels=lab)
        q = nep_responses(g)
        for v in range(7):
            assert q[v] == (lab[(v - 1) % 7] + lab[(v + 1) % 7]) / 2


class TestEstimators:
    def test_intent_large_budget(self, iid_labeled):
        est = intent_poll(iid_labeled, 100_000, seed=1).estimate
        assert abs(est - iid_labeled.labels.mean()) < 0.01

    def test_identical_labels_exact(self, powerlaw_lcc):
        g = powerlaw_lcc.with_labels(np.ones(powerlaw_lcc.n, dtype=np.int8))
        for b in (1, 7):
            assert intent_poll(g, b, seed=b).estimate == 1.0
            assert nep_uniform(g, b, seed=b).estimate == 1.0
            assert nep_random_walk(g, b, 10, seed=b).estimate == 1.0
            assert nep_friend_of_node(g, b, seed=b).estimate == 1.0

    def test_intent_bernoulli_mse(self):
        g = cycle_graph(10, labels=[1, 1, 1] + [0] * 7)
        tab = mse_experiment(g, ["intent"], [1], 10_000, seed=3)
        assert abs(tab.row("intent", 1).mse - 0.21) < 0.01

    def test_uniform_biased_on_red_hub(self):
        g = star_graph(20, labels=[1] + [0] * 20)
        tab = mse_experiment(g, ["UN", "intent"], [10], 2000, seed=4)
        assert tab.row("UN", 10).bias > 0.8
        assert abs(tab.row("intent", 10).bias) < 0.02

    def test_uniform_zero_variance(self):
        # every node of K_{3,3} sees exactly one infected node out of three
        g = complete_bipartite(3, 3, labels=[1, 0, 0, 1, 0, 0])
        assert np.allclose(nep_responses(g), 1 / 3)
        for s in range(20):
            assert nep_uniform(g, 4, seed=s).estimate == pytest.approx(1 / 3)

    def test_random_walk_zero_steps_is_uniform(self, iid_labeled):
        for t in range(50):
            a = nep_uniform(iid_labeled, 9, seed=trial_seed(0, 0, 9, t))
            b = nep_random_walk(iid_labeled, 9, 0, seed=trial_seed(0, 0, 9, t))
            assert a.estimate == b.estimate
        tab = mse_experiment(iid_labeled, ["UN", "RW"], [5], 300, seed=2, N=0,
                             paired=True, keep_estimates=True)
        assert np.array_equal(tab.estimates[("UN", 5)], tab.estimates[("RW", 5)])

    def test_random_walk_needs_connected(self):
        g = Graph.from_edges(4, [(0, 1), (2, 3)], [1, 0, 0, 0])
        with pytest.raises(GraphError):
            nep_random_walk(g, 3, 10, seed=0)
        with pytest.raises(GraphError):
            mse_experiment(g, ["RW"], [1], 100)

    def test_random_walk_unbiased_when_uncorrelated(self):
        # K_{2,4} plus the hub-hub edge, half of each degree class infected
        edges = [(i, 2 + j) for i in range(2) for j in range(4)] + [(0, 1)]
        g = Graph.from_edges(6, edges, [1, 0, 1, 1, 0, 0])
        assert exact_bias_rw(g).value == pytest.approx(0.0, abs=1e-15)
        assert exact_var_rw(g, 3) > 0
        tab = mse_experiment(g, ["RW"], [3], 20_000, seed=5, N=60)
        r = tab.row("RW", 3)
        assert abs(r.bias) < 3 * np.sqrt(r.var / r.trials)

    def test_p3_bias_lazy_walk(self, p3_hub):
        tab = mse_experiment(p3_hub, ["RW"], [1], 20_000, seed=6, N=100, lazy=True)
        r = tab.row("RW", 1)
        assert abs(r.bias - 1 / 6) < 3 * np.sqrt(r.var / r.trials)

    def test_friend_of_node_regular_matches_uniform(self):
        g = cycle_graph(9, labels=[1, 0, 0, 1, 1, 0, 0, 0, 1])
        vf, pf = single_response_law(g, "FN")
        vu, pu = single_response_law(g, "UN")
        assert np.allclose(pf, pu) and np.array_equal(vf, vu)
        tab = mse_experiment(g, ["UN", "FN"], [3], 20_000, seed=7)
        a, b = tab.row("UN", 3), tab.row("FN", 3)
        assert abs(a.mse - b.mse) < 3 * np.hypot(a.mse_se, b.mse_se)

    def test_bad_budget(self, star):
        with pytest.raises(ValueError):
            intent_poll(star, 0)
        with pytest.raises(ValueError):
            nep_uniform(star, 2.5)


class TestExactFormulas:
    def test_p3_bias(self, p3_hub):
        res = exact_bias_rw(p3_hub)
        assert res.friend_minus_node == pytest.approx(1 / 6, abs=1e-15)
        assert res.cov_over_mean_degree == pytest.approx(1 / 6, abs=1e-15)

    def test_constant_labels(self, powerlaw_lcc):
        for val in (0, 1):
            g = powerlaw_lcc.with_labels(np.full(powerlaw_lcc.n, val, dtype=np.int8))
            assert exact_bias_rw(g).value == pytest.approx(0.0, abs=1e-14)
            assert exact_var_rw(g, 3) == pytest.approx(0.0, abs=1e-14)

    @settings(max_examples=200, deadline=None)
    @given(small_graphs())
    def test_bias_forms_agree(self, g):
        res = exact_bias_rw(g)
        assert abs(res.friend_minus_node - res.cov_over_mean_degree) <= 1e-12

    def test_var_scales(self, iid_labeled):
        v1 = exact_var_rw(iid_labeled, 1)
        assert exact_var_rw(iid_labeled, 2) == v1 / 2
        assert exact_var_rw(iid_labeled, 8) == v1 / 8

    @settings(max_examples=200, deadline=None)
    @given(small_graphs())
    def test_var_equals_stationary_response_variance(self, g):
        # cov(s(Y), q(U)) = Var(q(Y)) for a uniform directed edge (U, Y)
        assert exact_var_rw(g, 1) == pytest.approx(exact_mse(g, "RW", 1)[2], abs=1e-13)
        assert exact_mse(g, "RW", 1)[1] == pytest.approx(exact_bias_rw(g).value, abs=1e-13)

    def test_p3_var(self, p3_hub):
        assert exact_var_rw(p3_hub, 1) == pytest.approx(0.25)
        assert exact_var_rw(p3_hub, 5) == pytest.approx(0.05)

    def test_empirical_matches_exact(self, iid_labeled):
        tab = mse_experiment(iid_labeled, ["intent", "UN", "RW", "FN"], [1, 10], 4000,
                             seed=8, N=300)
        for r in tab.rows:
            mse, _, _ = exact_mse(iid_labeled, r.estimator, r.budget)
            assert abs(r.mse - mse) < 3.5 * r.mse_se


class TestSmallBudget:
    def test_p3_hub(self, p3_hub):
        res = small_budget_condition(p3_hub)
        assert res.mean_degree_infected == 2 and res.mean_degree_susceptible == 1
        assert res.true_fraction == pytest.approx(1 / 3)
        assert res.holds is False

    def test_p3_leaves(self):
        res = small_budget_condition(path_graph(3, labels=[1, 0, 1]))
        assert res.holds is False
        assert not res.low_fraction_branch and not res.high_fraction_branch

    def test_balanced_regular(self):
        res = small_budget_condition(cycle_graph(6, labels=[1, 0, 1, 0, 1, 0]))
        assert res.holds and res.low_fraction_branch and res.high_fraction_branch

    def test_indeterminate(self, star):
        assert small_budget_condition(star).holds is None

    @settings(max_examples=300, deadline=None)
    @given(small_graphs())
    def test_condition_is_sufficient(self, g):
        res = small_budget_condition(g)
        if res.holds:
            rho = res.true_fraction
            assert exact_mse(g, "RW", 1)[0] <= rho * (1 - rho) + 1e-12

    def test_empirical_when_condition_holds(self, powerlaw_lcc):
        # infect mostly low-degree nodes, fraction below one half
        g = assign_labels(powerlaw_lcc, 0.4, -0.2, seed=3).graph
        assert small_budget_condition(g).holds
        tab = mse_experiment(g, ["RW", "intent"], [1], 20_000, seed=9, N=300)
        rw, it = tab.row("RW", 1), tab.row("intent", 1)
        assert rw.mse <= it.mse + 3 * np.hypot(rw.mse_se, it.mse_se)


class TestMseExperiment:
    def test_identity_and_schema(self, iid_labeled, tmp_path):
        tab = mse_experiment(iid_labeled, ["intent", "FN"], [1, 5], 500, seed=1,
                             graph_id="g0", alpha_or_model="2.1")
        for r in tab.rows:
            assert r.mse == pytest.approx(r.bias ** 2 + r.var, abs=1e-15)
        tab.to_csv(tmp_path / "m.csv")
        lines = (tmp_path / "m.csv").read_text().splitlines()
        assert lines[0] == ("graph_id,alpha_or_model,r_kk,p_ks,estimator,budget,mse,"
                            "bias,var,trials,mse_se")
        assert len(lines) == 5 and lines[1].startswith("g0,2.1,")

    def test_deterministic(self, iid_labeled):
        a = mse_experiment(iid_labeled, ["RW", "FN"], [3], 200, seed=5, N=20)
        b = mse_experiment(iid_labeled, ["RW", "FN"], [3], 200, seed=5, N=20)
        assert a.rows == b.rows

    def test_min_trials(self, iid_labeled):
        with pytest.raises(ValueError):
            mse_experiment(iid_labeled, ["UN"], [1], 99)

    def test_unknown_estimator(self, iid_labeled):
        with pytest.raises(ValueError):
            mse_experiment(iid_labeled, ["XX"], [1], 100)
