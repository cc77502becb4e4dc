"""Policy behavior: slate validity, posterior draws, exploration rules."""

import itertools
import pickle

import numpy as np
import pytest
from scipy import stats as sps

from pbm_lab.core import (ClickStats, PbmParams, best_recommendation, draw_rewards,
                          expected_reward, make_rng, update_stats)
from pbm_lab.inference import click_matrix, svd_rank1_extract
from pbm_lab.policies import (BcMptsPolicy, EpsGreedyPolicy, GreedyPolicy, OraclePolicy,
                              PbMhbPolicy, PbmTsPolicy, PolicySpec, UniformRandomPolicy,
                              bcmpts_beta_shapes)
from pbm_lab.sampler import MhConfig, mh_sample

STD = PbmParams(theta=[0.3, 0.2, 0.15, 0.15, 0.15, 0.10, 0.05, 0.05, 0.01, 0.01],
                kappa=[1.0, 0.75, 0.6, 0.3, 0.1])


def play_rounds(env, policy, rounds, rng, rec_fn=None):
    """Drive the policy (or a fixed slate rule) against the environment."""
    for t in range(1, rounds + 1):
        rec = rec_fn(t, rng) if rec_fn else policy.choose(t, rng)
        rewards = draw_rewards(env, rec, rng)
        policy.feedback(rec, rewards)


def assert_ordered_subsets_uniform(draw_fn, n_items, n_positions, n_draws, seed):
    """Chi-square uniformity over all ordered item subsets at significance 1e-3."""
    rng = make_rng(seed)
    cells = {perm: 0 for perm in itertools.permutations(range(n_items), n_positions)}
    for _ in range(n_draws):
        cells[tuple(draw_fn(rng))] += 1
    counts = np.array(list(cells.values()))
    pvalue = sps.chisquare(counts).pvalue
    assert pvalue > 1e-3, f"uniformity rejected: p={pvalue:.2e}"


class TestSlateValidity:
    """Every policy must return L distinct valid items, every round."""

    @pytest.mark.parametrize("spec_dict", [
        {"policy": "pb-mhb", "c": 100, "m": 1, "warm_start": True},
        {"policy": "bc-mpts", "mode": "semi-oracle"},
        {"policy": "bc-mpts", "mode": "greedy"},
        {"policy": "pbm-ts", "mode": "semi-oracle"},
        {"policy": "eps-greedy", "c": 10},
        {"policy": "greedy"},
        {"policy": "uniform"},
        {"policy": "oracle"},
    ])
    def test_distinct_valid_items(self, spec_dict):
        env = PbmParams(theta=[0.6, 0.4, 0.3, 0.2, 0.1], kappa=[1.0, 0.5, 0.2])
        policy = PolicySpec.from_dict(spec_dict).build(env)
        rng = make_rng(31)
        for t in range(1, 40):
            rec = policy.choose(t, rng)
            assert len(set(rec.tolist())) == env.n_positions
            assert all(0 <= i < env.n_items for i in rec)
            policy.feedback(rec, draw_rewards(env, rec, rng))


class TestPbMhb:
    def test_first_round_is_uniform_over_ordered_subsets(self):
        def draw(rng):
            policy = PbMhbPolicy(4, 2, MhConfig(c=100, m=1, warm_start=False))
            return policy.choose(1, rng)

        assert_ordered_subsets_uniform(draw, 4, 2, 12_000, seed=2)

    def test_concentrated_posterior_puts_best_item_first(self):
        env = PbmParams(theta=[0.95, 0.1, 0.1, 0.1], kappa=[1.0, 0.6, 0.3])
        policy = PbMhbPolicy(4, 3, MhConfig(c=100, m=1, warm_start=True))
        rng = make_rng(41)
        play_rounds(env, policy, 2000, rng,
                    rec_fn=lambda t, r: best_recommendation(env))
        hits = sum(policy.choose(t, rng)[0] == 0 for t in range(2001, 2201))
        assert hits / 200 >= 0.9

    def test_warm_start_reuses_previous_sample(self):
        env = PbmParams(theta=[0.4, 0.3, 0.2], kappa=[1.0, 0.5])
        policy = PbMhbPolicy(3, 2, MhConfig(c=50, m=1, warm_start=True))
        rng = make_rng(77)
        rec1 = policy.choose(1, rng)
        carried = policy.last_sample
        policy.feedback(rec1, np.array([0, 1]))
        assert policy.last_sample is carried  # feedback must not disturb the chain state

        # the next draw continues the chain from exactly that sample
        rng_clone = pickle.loads(pickle.dumps(rng))
        rec2 = policy.choose(2, rng)
        expected = mh_sample(policy.stats, policy.config, 2, rng_clone, start=carried)
        assert np.array_equal(policy.last_sample.theta, expected.theta)
        assert np.array_equal(policy.last_sample.kappa, expected.kappa)

    def test_cold_start_ignores_previous_sample(self):
        policy = PbMhbPolicy(3, 2, MhConfig(c=50, m=1, warm_start=False))
        rng = make_rng(78)
        policy.choose(1, rng)
        first = policy.last_sample
        rng_clone = pickle.loads(pickle.dumps(rng))
        policy.choose(2, rng)
        cold = mh_sample(policy.stats, policy.config, 2, rng_clone, start=None)
        assert np.array_equal(policy.last_sample.theta, cold.theta)
        assert first is not policy.last_sample


class TestBcMpts:
    def test_beta_shapes_from_displays(self):
        stats = ClickStats(4, 2)
        stats.S[0, 0] = 30
        stats.F[0, 0] = 70
        a, b = bcmpts_beta_shapes(stats, np.array([1.0, 0.75]))
        assert a[0] == 31.0 and b[0] == 71.0
        assert a[1] == 1.0 and b[1] == 1.0

    def test_second_shape_clamped_at_one(self):
        # all displays clicked at a weakly examined position: pseudo-count
        # falls below the click count and the raw second shape would be <= 0
        stats = ClickStats(2, 1)
        stats.S[0, 0] = 10
        a, b = bcmpts_beta_shapes(stats, np.array([0.5]))
        assert a[0] == 11.0 and b[0] == 1.0

    def test_no_data_uniform_over_ordered_subsets(self):
        kappa = np.array([1.0, 0.7])

        def draw(rng):
            return BcMptsPolicy(4, 2, kappa=kappa).choose(1, rng)

        assert_ordered_subsets_uniform(draw, 4, 2, 12_000, seed=3)

    def test_semi_oracle_uses_given_kappa_only(self):
        policy = BcMptsPolicy(3, 2, kappa=np.array([1.0, 0.5]))
        assert policy.fixed_kappa is not None
        greedy = BcMptsPolicy(3, 2)
        assert greedy.fixed_kappa is None


class TestPbmTs:
    def test_single_position_is_exact_conjugate(self):
        policy = PbmTsPolicy(3, 1, kappa=np.array([1.0]))
        policy.stats.S[0, 0] = 7
        policy.stats.F[0, 0] = 13
        rng = make_rng(5)
        draws = np.array([policy.draw_item_theta(0, np.array([1.0]), rng)
                          for _ in range(8000)])
        assert policy.cap_hits == 0
        assert sps.kstest(draws, sps.beta(8, 14).cdf).statistic < 0.02

    def test_empty_stats_draws_uniform(self):
        kappa = np.array([1.0, 0.75])
        policy = PbmTsPolicy(3, 2, kappa=kappa)
        rng = make_rng(6)
        draws = np.array([policy.draw_item_theta(1, kappa, rng) for _ in range(8000)])
        assert policy.cap_hits == 0
        assert sps.kstest(draws, "uniform").statistic < 0.02

    def test_first_round_is_uniform_over_ordered_subsets(self):
        kappa = np.array([1.0, 0.75])

        def draw(rng):
            return PbmTsPolicy(4, 2, kappa=kappa).choose(1, rng)

        assert_ordered_subsets_uniform(draw, 4, 2, 8000, seed=7)

    def test_matches_item_conditional_quadrature(self):
        stats = ClickStats.from_counts(S=[[6, 2], [3, 1]], F=[[9, 14], [10, 12]])
        kappa = np.array([1.0, 0.6])
        policy = PbmTsPolicy(2, 2, kappa=kappa)
        policy.stats = stats
        rng = make_rng(17)
        draws = np.array([policy.draw_item_theta(0, kappa, rng) for _ in range(10_000)])

        grid = (np.arange(4000) + 0.5) / 4000
        log_target = (stats.S[0].sum() * np.log(grid)
                      + stats.F[0, 0] * np.log1p(-grid)
                      + stats.F[0, 1] * np.log1p(-grid * kappa[1]))
        weights = np.exp(log_target - log_target.max())
        exact_mean = float((grid * weights).sum() / weights.sum())
        assert draws.mean() == pytest.approx(exact_mean, abs=0.02)

    def test_accepted_values_in_unit_interval(self):
        stats = ClickStats.from_counts(S=[[5, 1], [2, 2]], F=[[1, 9], [8, 3]])
        kappa = np.array([1.0, 0.3])
        policy = PbmTsPolicy(2, 2, kappa=kappa)
        policy.stats = stats
        rng = make_rng(8)
        for _ in range(500):
            x = policy.draw_item_theta(0, kappa, rng)
            assert 0.0 < x <= 1.0

    def test_most_displayed_position_tie_goes_low(self):
        policy = PbmTsPolicy(3, 3, kappa=np.array([1.0, 0.8, 0.6]))
        # equal displays everywhere: position 0 must win the argmax
        policy.stats.S[0] = [2, 2, 2]
        policy.stats.F[0] = [3, 3, 3]
        rng = make_rng(9)
        draws = np.array([policy.draw_item_theta(0, np.array([1.0, 0.8, 0.6]), rng)
                          for _ in range(2000)])
        assert np.all(draws <= 1.0)


class TestEpsGreedy:
    def test_zero_constant_is_pure_greedy(self):
        env = STD
        eps = EpsGreedyPolicy(10, 5, c=0.0)
        ref = GreedyPolicy(10, 5)
        rng = make_rng(12)
        play_rounds(env, eps, 100, rng)
        ref.stats = eps.stats
        assert np.array_equal(eps.choose(101, make_rng(0)), ref.choose(101, make_rng(1)))

    def test_full_replacement_changes_every_slot(self):
        # with eps = 1 each slot's occupant is excluded from its own
        # replacement pool, so no slot can keep its greedy item
        policy = EpsGreedyPolicy(10, 5, c=1000.0)
        greedy_rec = GreedyPolicy(10, 5).choose(1, make_rng(0))
        rng = make_rng(13)
        for t in (1, 10, 1000):  # t <= c keeps eps clamped at 1
            rec = policy.choose(t, rng)
            assert np.all(rec != greedy_rec)
            assert len(set(rec.tolist())) == 5

    def test_replacement_rate_matches_eps(self):
        policy = EpsGreedyPolicy(10, 5, c=1000.0)
        greedy_rec = GreedyPolicy(10, 5).choose(1, make_rng(0))
        rng = make_rng(23)
        t = 10_000  # eps = 0.1
        n = 10_000
        replaced = sum(policy.choose(t, rng)[0] != greedy_rec[0] for _ in range(n))
        se = np.sqrt(0.1 * 0.9 / n)
        assert abs(replaced / n - 0.1) <= 4 * se


class TestGreedy:
    def test_exact_recovery_from_rank_one_counts(self):
        env = PbmParams(theta=[0.31, 0.22, 0.16, 0.08], kappa=[1.0, 0.6, 0.25])
        policy = GreedyPolicy(4, 3)
        n = 10**6  # large counts make the smoothing correction negligible
        for i in range(4):
            for pos in range(3):
                s = int(round(n * env.theta[i] * env.kappa[pos]))
                policy.stats.S[i, pos] = s
                policy.stats.F[i, pos] = n - s
        rec = policy.choose(1, make_rng(0))
        assert np.array_equal(rec, best_recommendation(env))

    def test_empty_stats_falls_back_to_lexicographic(self):
        policy = GreedyPolicy(6, 3)
        assert policy.choose(1, make_rng(0)).tolist() == [0, 1, 2]

    def test_reaches_oracle_reward_after_uniform_exploration(self):
        # consistent estimation needs every cell visited, hence uniform play;
        # theta ties make several slates reward-optimal, so compare rewards
        env = STD
        mu_star = expected_reward(env, best_recommendation(env))
        hits = 0
        trials = 20
        for seed in range(trials):
            rng = make_rng(5000 + seed)
            policy = GreedyPolicy(env.n_items, env.n_positions)
            play_rounds(env, policy, 10_000, rng,
                        rec_fn=lambda t, r: r.permutation(env.n_items)[:env.n_positions])
            rec = policy.choose(10_001, rng)
            hits += expected_reward(env, rec) == pytest.approx(mu_star, abs=1e-12)
        assert hits / trials >= 0.95


class TestUniformAndOracle:
    def test_uniform_is_uniform_over_ordered_subsets(self):
        def draw(rng):
            return UniformRandomPolicy(4, 2).choose(1, rng)

        assert_ordered_subsets_uniform(draw, 4, 2, 100_000, seed=4)

    def test_oracle_plays_the_best_slate_every_round(self):
        env = STD
        policy = OraclePolicy(env)
        rng = make_rng(15)
        target = best_recommendation(env)
        for t in (1, 2, 500):
            assert np.array_equal(policy.choose(t, rng), target)

    def test_oracle_on_std_setting_is_identity(self):
        assert OraclePolicy(STD).choose(1, make_rng(0)).tolist() == [0, 1, 2, 3, 4]


class TestPolicySpec:
    def test_parses_all_kinds(self):
        dicts = [
            {"policy": "pb-mhb", "c": 100, "m": 1, "warm_start": True},
            {"policy": "bc-mpts", "mode": "semi-oracle"},
            {"policy": "pbm-ts", "mode": "greedy"},
            {"policy": "eps-greedy", "c": 1000},
            {"policy": "greedy"},
            {"policy": "uniform"},
            {"policy": "oracle"},
        ]
        labels = [PolicySpec.from_dict(d).display_label for d in dicts]
        assert labels == ["pb-mhb(c=100,m=1,warm)", "bc-mpts(semi-oracle)",
                          "pbm-ts(greedy)", "eps-greedy(c=1000)",
                          "greedy", "uniform", "oracle"]

    def test_round_trips_through_dict(self):
        d = {"policy": "pb-mhb", "c": 10, "m": 2, "warm_start": False, "label": "mine"}
        spec = PolicySpec.from_dict(d)
        assert spec.display_label == "mine"
        assert PolicySpec.from_dict(spec.to_dict()) == spec

    def test_rejects_unknown_policy_and_options(self):
        with pytest.raises(ValueError):
            PolicySpec.from_dict({"policy": "ucb"})
        with pytest.raises(ValueError):
            PolicySpec.from_dict({"policy": "greedy", "c": 3})
        with pytest.raises(ValueError):
            PolicySpec.from_dict({"policy": "bc-mpts", "mode": "oracle"})
        with pytest.raises(ValueError):
            PolicySpec.from_dict({"mode": "greedy"})

    def test_build_injects_environment_truth(self):
        env = PbmParams(theta=[0.5, 0.4, 0.2], kappa=[1.0, 0.3])
        semi = PolicySpec.from_dict({"policy": "bc-mpts", "mode": "semi-oracle"}).build(env)
        assert np.array_equal(semi.fixed_kappa, env.kappa)
        oracle = PolicySpec.from_dict({"policy": "oracle"}).build(env)
        assert isinstance(oracle, OraclePolicy)
