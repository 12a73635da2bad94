import dataclasses

import numpy as np
import pytest

from banditlab.domain import DomainError, restless4_spec, stationary2_spec
from banditlab.envgen import (
    DEFAULT_GROUP_SEEDS,
    RestlessEnv,
    StationaryEnv,
    default_groups,
    gen_reward_group,
    gen_stationary_games,
    round_half_away,
    sample_reward,
)


class TestRounding:
    def test_halves_round_away_from_zero(self):
        got = round_half_away(np.array([0.5, 1.5, 2.5, -0.5, -2.5, 2.4, -2.4]))
        assert got.tolist() == [1.0, 2.0, 3.0, -1.0, -3.0, 2.0, -2.0]

    def test_scalar_input(self):
        assert round_half_away(0.5) == 1.0
        assert round_half_away(-1.5) == -2.0


class TestStationaryGames:
    def test_deterministic_in_seed(self, stat_spec):
        a = gen_stationary_games(stat_spec, 20, seed=3)
        b = gen_stationary_games(stat_spec, 20, seed=3)
        assert [g.true_means for g in a] == [g.true_means for g in b]
        c = gen_stationary_games(stat_spec, 20, seed=4)
        assert [g.true_means for g in a] != [g.true_means for g in c]

    def test_games_mutually_distinct(self, stat_spec):
        games = gen_stationary_games(stat_spec, 20, seed=0)
        means = {g.true_means for g in games}
        assert len(means) == 20

    def test_mean_prior_monte_carlo(self, stat_spec):
        # 10,000 means from Normal(0, 100): mean within 3 SE of 0 and
        # variance within 3 SE of 100.
        games = gen_stationary_games(stat_spec, 5000, seed=1)
        draws = np.array([m for g in games for m in g.true_means])
        assert draws.size == 10_000
        assert abs(draws.mean()) < 3 * 10 / 100  # SE = 10/sqrt(10000)
        var_se = 100.0 * np.sqrt(2.0 / (draws.size - 1))
        assert abs(draws.var(ddof=1) - 100.0) < 3 * var_se

    def test_wrong_variant_rejected(self, rest_spec):
        with pytest.raises(DomainError):
            gen_stationary_games(rest_spec, 5, seed=0)


class TestRewardGroup:
    def test_initial_means(self, rest_spec):
        group = gen_reward_group(rest_spec, 1, seed=1)
        assert group.means[:, 0].tolist() == [20.0, 40.0, 60.0, 80.0]

    def test_zero_diffusion_fixed_point(self):
        spec = dataclasses.replace(
            restless4_spec(), diffusion_variance=0.0, initial_means=(50.0,) * 4
        )
        group = gen_reward_group(spec, 1, seed=1)
        assert np.allclose(group.means, 50.0)

    def test_regeneration_digest_identical(self, rest_spec):
        a = gen_reward_group(rest_spec, 2, seed=7)
        b = gen_reward_group(rest_spec, 2, seed=7)
        assert a.digest() == b.digest()
        c = gen_reward_group(rest_spec, 2, seed=8)
        assert a.digest() != c.digest()

    def test_mean_recursion_replayable(self, rest_spec):
        # Reconstructed drift noise must behave like the stated per-round,
        # per-arm Gaussian: correct variance, uncorrelated across arms.
        spec = dataclasses.replace(rest_spec, horizon=20_000)
        g = gen_reward_group(spec, 1, seed=1)
        lam, theta = spec.decay, spec.long_run_mean
        omega = g.means[:, 1:] - (lam * g.means[:, :-1] + (1 - lam) * theta)
        assert abs(omega.var() - spec.diffusion_variance) < 0.1
        corr = np.corrcoef(omega)
        off_diag = corr[~np.eye(4, dtype=bool)]
        assert np.abs(off_diag).max() < 0.05

    def test_long_run_mean_variance(self):
        # AR(1) stationary variance: 2.8 / (1 - 0.9836^2) = 86.07.
        spec = dataclasses.replace(restless4_spec(), horizon=100_000)
        g = gen_reward_group(spec, 1, seed=1)
        tail = g.means[:, 2000:]
        target = spec.diffusion_variance / (1.0 - spec.decay**2)
        assert abs(target - 86.07) < 0.01
        assert abs(tail.var() - target) / target < 0.05

    def test_wrong_variant_rejected(self, stat_spec):
        with pytest.raises(DomainError):
            gen_reward_group(stat_spec, 1, seed=0)

    def test_default_groups(self):
        groups = default_groups()
        assert sorted(groups) == [1, 2, 3]
        assert groups[1].seed == DEFAULT_GROUP_SEEDS[1]
        digests = {groups[k].digest() for k in groups}
        assert len(digests) == 3


class TestSampleReward:
    def test_restless_reward_is_lookup(self, rest_spec):
        group = gen_reward_group(rest_spec, 1, seed=1)
        env = RestlessEnv(rest_spec, group)
        for arm, round_ in [(0, 1), (3, 300), (2, 157)]:
            want = float(group.rewards[arm, round_ - 1])
            assert sample_reward(env, arm, round_) == want
            assert sample_reward(env, arm, round_) == want

    def test_stationary_reward_variance(self):
        spec = stationary2_spec(horizon=10_000, integer_rewards=False)
        env = StationaryEnv(spec, (0.0, 0.0), np.random.default_rng(5))
        draws = np.array([env.sample_reward(0, t) for t in range(1, 10_001)])
        var_se = 10.0 * np.sqrt(2.0 / (draws.size - 1))
        assert abs(draws.var(ddof=1) - 10.0) < 3 * var_se

    def test_stationary_integer_rewards(self, stat_spec):
        env = StationaryEnv(stat_spec, (3.7, -1.2), np.random.default_rng(0))
        assert np.all(env.reward_table == np.round(env.reward_table))

    def test_out_of_range_rejected(self, rest_spec):
        env = RestlessEnv(rest_spec, gen_reward_group(rest_spec, 1, seed=1))
        with pytest.raises(DomainError):
            env.sample_reward(4, 1)
        with pytest.raises(DomainError):
            env.sample_reward(0, 0)
        with pytest.raises(DomainError):
            env.sample_reward(0, 301)

    def test_group_shape_checked(self, rest_spec):
        short = dataclasses.replace(rest_spec, horizon=10)
        group = gen_reward_group(short, 1, seed=1)
        with pytest.raises(DomainError):
            RestlessEnv(rest_spec, group)
