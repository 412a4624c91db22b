import warnings

import numpy as np
import pytest
from hypothesis import given, settings

from netdiffusion.graph import (
    Graph,
    assign_labels,
    complete_graph,
    cycle_graph,
    degree_stats,
    generate_configuration_model,
    path_graph,
    rewire_to_assortativity,
)
from netdiffusion.sampling import (
    BipartiteWarning,
    random_walk,
    random_walks,
    rds_chain,
    rds_estimate,
    sample_friend_of_random_node,
    sample_random_friend,
    sample_uniform_node,
    verify_friendship_paradox,
    walk_mixing_tv,
)

from conftest import tv_distance
from test_graph import small_graphs

N_DRAWS = 100_000


class TestSamplers:
    def test_uniform_star_hub(self, star):
        rng = np.random.default_rng(0)
        assert abs(np.mean(sample_uniform_node(star, rng, N_DRAWS) == 0) - 0.2) < 0.01

    def test_uniform_k2(self):
        g = path_graph(2)
        rng = np.random.default_rng(1)
        assert abs(np.mean(sample_uniform_node(g, rng, N_DRAWS)) - 0.5) < 0.01

    def test_seeded(self, powerlaw_2000):
        a = sample_uniform_node(powerlaw_2000, np.random.default_rng(3))
        b = sample_uniform_node(powerlaw_2000, np.random.default_rng(3))
        assert a == b

    def test_random_friend_star_hub(self, star):
        rng = np.random.default_rng(2)
        assert abs(np.mean(sample_random_friend(star, rng, N_DRAWS) == 0) - 0.5) < 0.01

    def test_random_friend_regular(self):
        g = cycle_graph(5)
        rng = np.random.default_rng(4)
        freq = np.bincount(sample_random_friend(g, rng, N_DRAWS), minlength=5) / N_DRAWS
        assert np.max(np.abs(freq - 0.2)) < 0.01

    def test_random_friend_matches_q(self, powerlaw_2000):
        g = powerlaw_2000
        stats = degree_stats(g)
        rng = np.random.default_rng(5)
        cls = np.searchsorted(stats.ks, g.degrees[sample_random_friend(g, rng, N_DRAWS)])
        emp = np.bincount(cls, minlength=len(stats.ks)) / N_DRAWS
        assert tv_distance(emp, stats.q) < 0.01

    def test_friend_of_node_star_hub(self, star):
        rng = np.random.default_rng(6)
        v = sample_friend_of_random_node(star, rng, N_DRAWS)
        assert abs(np.mean(v == 0) - 0.8) < 0.01
        assert abs(star.degrees[v].mean() - 3.4) < 0.03

    def test_friend_of_node_k2(self):
        rng = np.random.default_rng(7)
        v = sample_friend_of_random_node(path_graph(2), rng, N_DRAWS)
        assert abs(v.mean() - 0.5) < 0.01

    def test_friend_of_node_matches_census(self, powerlaw_2000):
        # sampled law of d(Z) against the census two-stage sum
        g = powerlaw_2000
        rep = verify_friendship_paradox(g)
        rng = np.random.default_rng(8)
        cls = np.searchsorted(rep.ks, g.degrees[sample_friend_of_random_node(g, rng, N_DRAWS)])
        emp = np.bincount(cls, minlength=len(rep.ks)) / N_DRAWS
        assert tv_distance(emp, rep.pmf_dZ) < 0.015


class TestRandomWalk:
    def test_zero_steps(self, star):
        rng = np.random.default_rng(0)
        assert random_walk(star, 3, 0, rng) == 3

    def test_k2_forced_move(self):
        g = path_graph(2)
        rng = np.random.default_rng(0)
        assert random_walk(g, 0, 1, rng) == 1
        assert random_walk(g, 1, 1, rng) == 0

    def test_star_hub_frequency_lazy(self, star):
        # the star is bipartite, so only the lazy walk has a limiting law
        rng = np.random.default_rng(1)
        starts = rng.integers(0, star.n, N_DRAWS)
        ends = random_walks(star, starts, 1000, rng, lazy=True)
        assert abs(np.mean(ends == 0) - 0.5) < 0.01

    def test_star_simple_walk_is_periodic(self, star):
        rng = np.random.default_rng(1)
        ends = random_walks(star, np.ones(1000, dtype=int), 1000, rng)
        assert np.all(ends != 0)

    def test_mixing_on_nonbipartite_graph(self, powerlaw_lcc):
        g = powerlaw_lcc
        rng = np.random.default_rng(2)
        starts = rng.integers(0, g.n, N_DRAWS)
        ends = random_walks(g, starts, 1000, rng)
        assert walk_mixing_tv(g, ends) < 0.02

    def test_walk_stays_on_edges(self, powerlaw_lcc):
        g = powerlaw_lcc
        rng = np.random.default_rng(3)
        v = 0
        for _ in range(200):
            w = random_walk(g, v, 1, rng)
            assert w in g.neighbors(v)
            v = w


class TestRds:
    def test_regular_graph_plain_average(self):
        g = complete_graph(7)
        stat = np.arange(7) % 2
        chain, pi = rds_chain(g, 500, seed=1)
        assert np.allclose(pi, 1 / 7)
        est = rds_estimate(g, 500, seed=1, statistic=stat)
        assert est == pytest.approx(stat[chain].mean(), abs=1e-14)

    def test_star_reweighting(self, star):
        stat = (np.arange(star.n) == 0).astype(float)
        with pytest.warns(BipartiteWarning):
            est = rds_estimate(star, 200_000, seed=2, statistic=stat)
        assert abs(est - 0.2) < 0.01
        with pytest.warns(BipartiteWarning):
            chain, _ = rds_chain(star, 200_000, seed=2)
        # visit frequency is degree-biased
        assert abs(np.mean(chain == 0) - 0.5) < 0.01

    def test_converges_to_census(self, powerlaw_lcc):
        g = assign_labels(powerlaw_lcc, 0.3, 0.2, seed=3).graph
        truth = g.labels.mean()
        est = rds_estimate(g, 1_000_000, seed=4, burn_in=1000)
        assert abs(est - truth) < 0.01

    def test_nonuniform_weights(self, powerlaw_lcc):
        g = assign_labels(powerlaw_lcc, 0.4, -0.1, seed=5).graph
        rng = np.random.default_rng(6)
        w = rng.uniform(0.5, 2.0, g.n_edges)
        chain, pi = rds_chain(g, 10, seed=0, weights=w)
        strength = np.zeros(g.n)
        np.add.at(strength, g.edges[:, 0], w)
        np.add.at(strength, g.edges[:, 1], w)
        assert np.allclose(pi, strength / strength.sum())
        est = rds_estimate(g, 1_000_000, seed=7, weights=w, burn_in=1000)
        assert abs(est - g.labels.mean()) < 0.01

    def test_bad_weights(self, star):
        with pytest.raises(ValueError):
            rds_estimate(star, 10, weights=np.zeros(star.n_edges))
        with pytest.raises(ValueError):
            rds_estimate(star, 10, weights=np.ones(2))

    def test_no_warning_when_not_bipartite(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            rds_chain(complete_graph(4), 10, seed=0)


class TestParadox:
    def test_star_means(self, star):
        rep = verify_friendship_paradox(star)
        assert (rep.mean_dX, rep.mean_dY, rep.mean_dZ) == pytest.approx((1.6, 2.5, 3.4))

    def test_regular_equality(self):
        rep = verify_friendship_paradox(cycle_graph(8))
        assert rep.mean_dX == rep.mean_dY == pytest.approx(2.0)
        assert rep.mean_dZ == pytest.approx(2.0)
        assert rep.fosd_ZX_holds and rep.lr_YX_monotone

    def test_z_law_matches_degree_stats(self, powerlaw_2000):
        # two-stage edge sum against the conditional-degree route
        rep = verify_friendship_paradox(powerlaw_2000)
        stats = degree_stats(powerlaw_2000)
        assert np.allclose(rep.pmf_dZ, stats.z_weights, atol=1e-13)

    def test_rewired_variants(self):
        g = generate_configuration_model(5000, 2.4, seed=21)
        reps = [verify_friendship_paradox(rewire_to_assortativity(g, r, seed=1).graph)
                for r in (-0.2, 0.0, 0.2)]
        for rep in reps[1:]:
            assert np.array_equal(rep.cdf_dX, reps[0].cdf_dX)
            assert np.array_equal(rep.cdf_dY, reps[0].cdf_dY)
        assert np.max(np.abs(reps[0].cdf_dZ - reps[2].cdf_dZ)) > 0.01
        means = [rep.mean_dZ for rep in reps]
        assert means[0] > means[1] > means[2]

    def test_csv(self, star, tmp_path):
        verify_friendship_paradox(star).to_csv(tmp_path / "p.csv")
        lines = (tmp_path / "p.csv").read_text().splitlines()
        assert lines[0] == "degree,cdf_X,cdf_Y,cdf_Z"
        assert lines[1].split(",")[:2] == ["1", "0.8"]
        assert lines[-1].startswith("4,1,1,1")

    @settings(max_examples=200, deadline=None)
    @given(small_graphs())
    def test_theorems_hold(self, g: Graph):
        rep = verify_friendship_paradox(g)
        assert rep.mean_dY >= rep.mean_dX - 1e-12
        assert rep.fosd_ZX_holds
        assert rep.lr_YX_monotone
        assert np.allclose(rep.pmf_dY / rep.pmf_dX, rep.ks / rep.mean_dX)
