"""Environment types, reward arithmetic, and the oracle slate."""

import itertools
import json

import numpy as np
import pytest

from pbm_lab.core import (ClickStats, PbmParams, best_recommendation, check_recommendation,
                          draw_rewards, expected_reward, make_rng, update_stats)

STD_THETA = [0.3, 0.2, 0.15, 0.15, 0.15, 0.10, 0.05, 0.05, 0.01, 0.01]
STD_KAPPA = [1.0, 0.75, 0.6, 0.3, 0.1]


def std_env() -> PbmParams:
    return PbmParams(theta=STD_THETA, kappa=STD_KAPPA)


class TestPbmParams:
    def test_valid_construction(self):
        env = std_env()
        assert env.n_items == 10
        assert env.n_positions == 5

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            PbmParams(theta=[1.2, 0.1], kappa=[1.0])
        with pytest.raises(ValueError):
            PbmParams(theta=[0.5, 0.1], kappa=[1.0, -0.1])

    def test_rejects_unpinned_first_position(self):
        with pytest.raises(ValueError, match="kappa"):
            PbmParams(theta=[0.5, 0.1], kappa=[0.9, 0.5])

    def test_rejects_more_positions_than_items(self):
        with pytest.raises(ValueError):
            PbmParams(theta=[0.5], kappa=[1.0, 0.5])

    def test_json_roundtrip(self, tmp_path):
        env = std_env()
        path = tmp_path / "params.json"
        env.save(path)
        loaded = PbmParams.load(path)
        assert np.array_equal(loaded.theta, env.theta)
        assert np.array_equal(loaded.kappa, env.kappa)
        # plain-text schema: one object with two arrays
        raw = json.loads(path.read_text())
        assert set(raw) == {"theta", "kappa"}


class TestDrawRewards:
    def test_zero_theta_never_clicks(self):
        env = PbmParams(theta=[0.0, 0.0, 0.0], kappa=[1.0, 0.5])
        rng = make_rng(0)
        for _ in range(50):
            assert not draw_rewards(env, np.array([0, 2]), rng).any()

    def test_sure_success(self):
        env = PbmParams(theta=[1.0, 1.0], kappa=[1.0, 1.0])
        rng = make_rng(0)
        for _ in range(50):
            assert draw_rewards(env, np.array([1, 0]), rng).all()

    def test_click_rates_match_bernoulli_means(self):
        env = std_env()
        rec = best_recommendation(env)
        rng = make_rng(42)
        n = 100_000
        counts = np.zeros(env.n_positions)
        for _ in range(n):
            counts += draw_rewards(env, rec, rng)
        rates = counts / n
        expected = env.theta[rec] * env.kappa
        se = np.sqrt(expected * (1 - expected) / n)
        assert np.all(np.abs(rates - expected) <= 4 * se)

    def test_seed_reproducibility(self):
        env = std_env()
        rec = best_recommendation(env)
        a = [draw_rewards(env, rec, make_rng(99)).tolist() for _ in range(1)]
        b = [draw_rewards(env, rec, make_rng(99)).tolist() for _ in range(1)]
        assert a == b

    def test_dimension_mismatch(self):
        env = std_env()
        rng = make_rng(0)
        with pytest.raises(ValueError):
            draw_rewards(env, np.array([0, 1]), rng)
        with pytest.raises(ValueError):
            draw_rewards(env, np.array([0, 1, 2, 3, 10]), rng)
        with pytest.raises(ValueError, match="distinct"):
            draw_rewards(env, np.array([0, 1, 2, 3, 3]), rng)


class TestExpectedReward:
    def test_all_zero_theta(self):
        env = PbmParams(theta=[0.0, 0.0], kappa=[1.0])
        assert expected_reward(env, np.array([1])) == 0.0

    def test_oracle_value_on_std_setting(self):
        env = std_env()
        assert expected_reward(env, best_recommendation(env)) == pytest.approx(0.6)

    def test_no_ordering_beats_the_oracle(self):
        rng = make_rng(3)
        for _ in range(20):
            n, l = 6, 3
            env = PbmParams(theta=rng.random(n),
                            kappa=np.concatenate(([1.0], rng.random(l - 1))))
            best = expected_reward(env, best_recommendation(env))
            for perm in itertools.permutations(range(n), l):
                assert expected_reward(env, np.array(perm)) <= best + 1e-12

    def test_bounds(self):
        rng = make_rng(8)
        for _ in range(50):
            n, l = 7, 4
            env = PbmParams(theta=rng.random(n),
                            kappa=np.concatenate(([1.0], rng.random(l - 1))))
            value = expected_reward(env, rng.permutation(n)[:l])
            assert 0.0 <= value <= l


class TestBestRecommendation:
    def test_identity_when_both_sorted(self):
        env = std_env()
        assert best_recommendation(env).tolist() == [0, 1, 2, 3, 4]

    def test_matches_exhaustive_search_with_shuffled_kappa(self):
        rng = make_rng(17)
        for _ in range(25):
            n = int(rng.integers(3, 7))
            l = int(rng.integers(1, min(n, 4) + 1))
            kappa = rng.random(l)
            kappa[0] = 1.0
            env = PbmParams(theta=rng.random(n), kappa=kappa)
            rec = best_recommendation(env)
            best = max(expected_reward(env, np.array(perm))
                       for perm in itertools.permutations(range(n), l))
            assert expected_reward(env, rec) == pytest.approx(best)

    def test_tie_break_prefers_lowest_indices(self):
        env = PbmParams(theta=[0.4, 0.4, 0.4, 0.4], kappa=[1.0, 0.5])
        assert best_recommendation(env).tolist() == [0, 1]
        # equal kappas: ties resolved to the lowest position first
        env2 = PbmParams(theta=[0.9, 0.2, 0.1], kappa=[1.0, 1.0])
        assert best_recommendation(env2).tolist() == [0, 1]


class TestUpdateStats:
    def test_single_round(self):
        stats = ClickStats(3, 2)
        update_stats(stats, np.array([0, 1]), np.array([1, 0]))
        assert stats.S[0, 0] == 1 and stats.F[1, 1] == 1
        assert stats.total_count() == 2

    def test_total_count_invariant(self):
        env = std_env()
        stats = ClickStats(env.n_items, env.n_positions)
        rng = make_rng(5)
        for t in range(1, 101):
            rec = rng.permutation(env.n_items)[: env.n_positions]
            update_stats(stats, rec, draw_rewards(env, rec, rng))
            assert stats.total_count() == t * env.n_positions

    def test_matches_replayed_recount(self):
        env = std_env()
        stats = ClickStats(env.n_items, env.n_positions)
        rng = make_rng(11)
        log = []
        for _ in range(200):
            rec = rng.permutation(env.n_items)[: env.n_positions]
            rewards = draw_rewards(env, rec, rng)
            update_stats(stats, rec, rewards)
            log.append((rec, rewards))
        # independent recount directly from the recorded log
        S = np.zeros_like(stats.S)
        F = np.zeros_like(stats.F)
        for rec, rewards in log:
            for pos in range(env.n_positions):
                if rewards[pos]:
                    S[rec[pos], pos] += 1
                else:
                    F[rec[pos], pos] += 1
        assert np.array_equal(S, stats.S)
        assert np.array_equal(F, stats.F)

    def test_rejects_bad_rewards(self):
        stats = ClickStats(3, 2)
        with pytest.raises(ValueError):
            update_stats(stats, np.array([0, 1]), np.array([1, 2]))
        with pytest.raises(ValueError):
            update_stats(stats, np.array([0, 1]), np.array([1]))


class TestCheckRecommendation:
    def test_accepts_lists(self):
        out = check_recommendation([2, 0, 1], n_items=4, n_positions=3)
        assert out.dtype == np.int64

    def test_rejects_out_of_range_items(self):
        with pytest.raises(ValueError):
            check_recommendation([0, 4], n_items=4, n_positions=2)
        with pytest.raises(ValueError):
            check_recommendation([-1, 2], n_items=4, n_positions=2)
