import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netdiffusion.graph import (
    complete_graph,
    cycle_graph,
    degree_stats,
    generate_configuration_model,
    generate_erdos_renyi,
    rewire_to_assortativity,
    star_graph,
)
from netdiffusion.meanfield import (
    MfdParams,
    NumericalError,
    activation_multiplier,
    bifurcation_scan,
    critical_threshold,
    mfd_step,
    mfd_trajectory,
    stationary_fraction,
    stationary_state,
    theta_X,
    theta_Z,
    viral_p01,
)

from oracles import (
    linearization_threshold,
    mf_jacobian_at_zero,
    spectral_radius,
    uncorrelated_stats,
)
from test_graph import small_graphs


@pytest.fixture(scope="module")
def pl_stats():
    g = generate_configuration_model(3000, 2.1, d_min=1, d_max=12, seed=8)
    return g, degree_stats(g)


class TestTheta:
    def test_constant_states(self, pl_stats):
        _, s = pl_stats
        K = len(s.ks)
        assert theta_X(np.zeros(K), s) == 0.0
        assert theta_X(np.ones(K), s) == pytest.approx(1.0)
        assert theta_Z(np.full(K, 0.37), s) == pytest.approx(0.37)

    def test_star(self):
        s = degree_stats(star_graph(4))
        x = np.array([0.0, 1.0])
        assert theta_X(x, s) == pytest.approx(0.2)
        assert theta_Z(x, s) == pytest.approx(0.8)

    def test_regular(self):
        s = degree_stats(cycle_graph(7))
        assert theta_X([0.3], s) == theta_Z([0.3], s)


class TestMultipliers:
    def test_star_z(self):
        s = degree_stats(star_graph(4))
        # a degree-4 node is activated w.p. 0.8 = 4 * P(4)
        assert np.allclose(activation_multiplier(s, "Z"), [0.25, 4.0])
        assert np.allclose(activation_multiplier(s, "Y"), [1 / 1.6, 4 / 1.6])

    def test_uncorrelated_z_equals_y(self):
        s = uncorrelated_stats([1, 2, 5, 9], [0.5, 0.3, 0.15, 0.05])
        assert np.allclose(activation_multiplier(s, "Z"), activation_multiplier(s, "Y"),
                           atol=1e-14)

    @settings(max_examples=100, deadline=None)
    @given(small_graphs())
    def test_bounded_by_max_degree(self, g):
        s = degree_stats(g)
        for a in "XYZ":
            c = activation_multiplier(s, a)
            assert np.all(c <= s.max_degree + 1e-12)
            # activation probabilities sum to one
            assert c @ s.P == pytest.approx(1.0)


class TestTrajectory:
    def test_zero_is_absorbing(self, pl_stats):
        _, s = pl_stats
        p = MfdParams(0.9, 0.2, s, activation="Y")
        traj = mfd_trajectory(p, np.zeros(len(s.ks)), 5)
        assert np.all(traj == 0)

    def test_uncorrelated_z_matches_y(self):
        s = uncorrelated_stats([1, 2, 3, 6, 10], [0.4, 0.25, 0.2, 0.1, 0.05])
        x0 = np.full(5, 0.1)
        ty = mfd_trajectory(MfdParams(0.6, 0.1, s, "Y", "monophilic", M=200), x0, 20)
        tz = mfd_trajectory(MfdParams(0.6, 0.1, s, "Z", "monophilic", M=200), x0, 20)
        assert np.max(np.abs(ty - tz)) < 1e-12

    def test_er_z_close_to_y(self):
        s = degree_stats(generate_erdos_renyi(4000, 6, seed=1))
        x0 = np.full(len(s.ks), 0.2)
        ty = mfd_trajectory(MfdParams(0.9, 0.3, s, "Y", M=500), x0, 10)
        tz = mfd_trajectory(MfdParams(0.9, 0.3, s, "Z", M=500), x0, 10)
        assert np.max(np.abs(ty - tz)) < 0.02

    @pytest.mark.parametrize("rule", ["non-monophilic", "monophilic"])
    def test_activation_invariance_of_fixed_point(self, pl_stats, rule):
        _, s = pl_stats
        x0 = np.full(len(s.ks), 0.05)
        D = s.max_degree
        ends = []
        for a in "XYZ":
            p = MfdParams(0.9, 0.1, s, a, rule, M=D)
            ends.append(mfd_trajectory(p, x0, 4000)[-1])
        target = stationary_state(s, 9.0, rule).x
        for e in ends:
            assert np.max(np.abs(e - ends[0])) < 1e-8
            assert np.max(np.abs(e - target)) < 1e-8

    def test_fixed_point_consistency(self, pl_stats):
        _, s = pl_stats
        for rule in ("non-monophilic", "monophilic"):
            for a in "XYZ":
                p = MfdParams(0.7, 0.05, s, a, rule)
                x = stationary_state(s, p.spreading_rate, rule).x
                assert np.max(np.abs(mfd_step(x, p) - x)) < 1e-10

    def test_custom_rates_match_builtin(self, pl_stats):
        _, s = pl_stats
        p = MfdParams(0.8, 0.2, s, "Y", "monophilic", M=100)
        x0 = np.linspace(0, 1, len(s.ks))
        a = mfd_trajectory(p, x0, 3, record_every=7)
        b = mfd_trajectory(p, x0, 3, record_every=7,
                           p01=lambda ks, th: viral_p01(ks, th, 0.8, s.max_degree),
                           p10=lambda ks, th: 0.2)
        assert np.max(np.abs(a - b)) < 1e-12

    def test_escape_raises(self, pl_stats):
        _, s = pl_stats
        p = MfdParams(1.0, 1.0, s, "Y", M=1)
        with pytest.raises(NumericalError):
            mfd_trajectory(p, np.ones(len(s.ks)), 1)

    def test_bad_x0(self, pl_stats):
        _, s = pl_stats
        with pytest.raises(ValueError):
            mfd_trajectory(MfdParams(0.5, 0.5, s), np.full(len(s.ks), 1.5), 1)

    @settings(max_examples=100, deadline=None)
    @given(small_graphs(), st.floats(0, 1), st.floats(0.01, 1), st.sampled_from("XYZ"),
           st.sampled_from(["non-monophilic", "monophilic"]), st.integers(0, 2**32 - 1))
    def test_step_stays_in_unit_box(self, g, nu, delta, act, rule, seed):
        s = degree_stats(g)
        M = s.max_degree * max(nu, delta)
        x = np.random.default_rng(seed).random(len(s.ks))
        x[0] = 1.0
        y = mfd_step(x, MfdParams(nu, delta, s, act, rule, M=M))
        assert np.all(y >= -1e-12) and np.all(y <= 1 + 1e-12)


class TestThreshold:
    def test_regular(self):
        s = degree_stats(complete_graph(5))
        assert critical_threshold(s).lambda_star == pytest.approx(1.0)
        assert critical_threshold(s, "monophilic").lambda_star == pytest.approx(1.0)

    def test_star(self):
        s = degree_stats(star_graph(4))
        assert critical_threshold(s).lambda_star == pytest.approx(2.5)
        assert critical_threshold(s, "monophilic").lambda_star == pytest.approx(4 / 3.4)

    @settings(max_examples=150, deadline=None)
    @given(small_graphs())
    def test_ordering(self, g):
        s = degree_stats(g)
        assert (critical_threshold(s, "monophilic").lambda_star
                <= critical_threshold(s).lambda_star + 1e-12)

    @pytest.mark.parametrize("rule", ["non-monophilic", "monophilic"])
    @pytest.mark.parametrize("activation", ["X", "Y", "Z"])
    def test_linearization_oracle(self, pl_stats, rule, activation):
        g, s = pl_stats
        lam = critical_threshold(s, rule).lambda_star
        below = spectral_radius(mf_jacobian_at_zero(g, 0.99 * lam, rule, activation))
        above = spectral_radius(mf_jacobian_at_zero(g, 1.01 * lam, rule, activation))
        assert below < 1.0 < above
        assert linearization_threshold(g, rule, activation) == pytest.approx(lam, rel=1e-6)


class TestStationary:
    def test_below_and_at_threshold(self, pl_stats):
        _, s = pl_stats
        for rule in ("non-monophilic", "monophilic"):
            lam = critical_threshold(s, rule).lambda_star
            assert stationary_state(s, lam, rule).rho == 0.0
            assert stationary_state(s, 0.5 * lam, rule).rho == 0.0
            assert stationary_state(s, 1.01 * lam, rule).rho > 0.0

    def test_large_rate(self, pl_stats):
        _, s = pl_stats
        assert stationary_state(s, 1e9).rho > 0.9999
        assert stationary_state(s, np.inf).rho == 1.0

    def test_regular_closed_form(self):
        s = degree_stats(cycle_graph(10))
        st_ = stationary_state(s, 2.0)
        assert st_.theta == pytest.approx(0.5, abs=1e-14)
        assert st_.rho == pytest.approx(0.5, abs=1e-14)
        assert stationary_fraction(MfdParams(0.5, 0.25, s)) == pytest.approx(0.5)

    def test_solves_fixed_point(self, pl_stats):
        _, s = pl_stats
        st_ = stationary_state(s, 12.0, "monophilic")
        r = 12.0 * s.ks * st_.theta / s.max_degree
        assert abs(s.z_weights @ (r / (1 + r)) - st_.theta) < 1e-14


class TestBifurcation:
    def test_below_grid_all_zero(self, pl_stats):
        _, s = pl_stats
        lam = critical_threshold(s).lambda_star
        curve = bifurcation_scan(s, "non-monophilic", np.linspace(0, 0.99 * lam, 20))
        assert np.all(curve[:, 1] == 0)

    def test_monotone_and_onset(self, pl_stats):
        _, s = pl_stats
        grid = np.linspace(0.1, 20, 200)
        for rule in ("non-monophilic", "monophilic"):
            curve = bifurcation_scan(s, rule, grid)
            assert np.all(np.diff(curve[:, 1]) >= 0)
            lam = critical_threshold(s, rule).lambda_star
            first = grid[np.argmax(curve[:, 1] > 0)]
            assert first == grid[grid > lam][0]

    def test_onset_gap(self, pl_stats):
        _, s = pl_stats
        lz = critical_threshold(s, "monophilic").lambda_star
        lx = critical_threshold(s).lambda_star
        grid = np.linspace(lz, lx, 30)[1:-1]
        assert np.all(bifurcation_scan(s, "monophilic", grid)[:, 1] > 0)
        assert np.all(bifurcation_scan(s, "non-monophilic", grid)[:, 1] == 0)

    def test_onset_increases_with_assortativity(self):
        g = generate_configuration_model(4000, 2.4, seed=2)
        onsets = []
        for r in (-0.2, 0.0, 0.2):
            h = rewire_to_assortativity(g, r, seed=3).graph
            onsets.append(critical_threshold(degree_stats(h), "monophilic").lambda_star)
        assert onsets[0] < onsets[1] < onsets[2]

    def test_unsorted_grid(self, pl_stats):
        with pytest.raises(ValueError):
            bifurcation_scan(pl_stats[1], "monophilic", [2.0, 1.0])
