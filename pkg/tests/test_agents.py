import math

import numpy as np
import pytest

from banditlab.agents import (
    EpsConfig,
    EpsGreedyAgent,
    ReplayAgent,
    ReplayIntegrityError,
    SimulatedChoiceAgent,
    TsAgent,
    TsConfig,
    UcbAgent,
    UcbConfig,
    ucb_f,
)
from banditlab.choicemodels import Model, QcareParams, SmParams
from banditlab.domain import DomainError, Step
from banditlab.learner import stationary2_learner


def feed(agent, arm, rewards, t0=100):
    for i, r in enumerate(rewards):
        agent.observe(t0 + i, arm, float(r))


class TestUcb:
    def test_schedule_hand_value(self):
        assert ucb_f(2) == pytest.approx(1.9609, abs=1e-4)
        assert ucb_f(1) == 1.0

    def test_warm_phase_in_index_order(self, rng):
        agent = UcbAgent()
        agent.reset(4, rng)
        assert [agent.act(t) for t in (1, 2, 3, 4)] == [0, 1, 2, 3]

    def test_identical_arms_tie_to_lowest(self, rng):
        agent = UcbAgent()
        agent.reset(3, rng)
        for arm in range(3):
            feed(agent, arm, [5.0, 7.0])
        assert agent.act(10) == 0

    def test_index_monotone_in_spread(self, rng):
        # Equal means and counts; the arm with larger sample SD must win.
        agent = UcbAgent()
        agent.reset(2, rng)
        feed(agent, 0, [10.0, 10.0])
        feed(agent, 1, [8.0, 12.0])
        assert agent.act(10) == 1

    def test_index_decreasing_in_count(self, rng):
        # Equal means and equal sample SDs; the less-pulled arm must win.
        agent = UcbAgent()
        agent.reset(2, rng)
        spread = 3.0
        feed(agent, 0, [10.0 - spread, 10.0 + spread])  # sample SD spread*sqrt(2)
        a = spread * math.sqrt(2.0) / math.sqrt(4.0 / 3.0)
        feed(agent, 1, [10.0 - a, 10.0 + a, 10.0 - a, 10.0 + a])  # same sample SD
        assert agent.act(9) == 0

    def test_prior_sd_used_below_two_samples(self, rng):
        agent = UcbAgent(UcbConfig(c=2.0, prior_sd=100.0))
        agent.reset(2, rng)
        feed(agent, 0, [50.0, 50.0, 50.0])
        feed(agent, 1, [0.0])  # one sample: falls back to the huge prior SD
        assert agent.act(7) == 1

    def test_config_validated(self):
        with pytest.raises(DomainError):
            UcbConfig(c=0.0)
        with pytest.raises(DomainError):
            UcbConfig(c=1.0, prior_sd=-1.0)


class TestTs:
    def test_hand_conjugate_update(self, rng):
        agent = TsAgent(TsConfig(mu0=0.0, lambda0=1.0, alpha0=1.0, beta0=1.0))
        agent.reset(2, rng)
        agent.observe(1, 0, 2.0)
        assert agent.mu[0] == 1.0
        assert agent.lam[0] == 2.0
        assert agent.alpha[0] == 1.5
        assert agent.beta[0] == 2.0  # 1 + 1*(2-0)^2 / (2*(1+1))

    def test_symmetric_prior_uniform_choice(self):
        agent = TsAgent()
        agent.reset(4, np.random.default_rng(3))
        picks = np.array([agent.act(1) for _ in range(10_000)])
        freqs = np.bincount(picks, minlength=4) / picks.size
        se = math.sqrt(0.25 * 0.75 / picks.size)
        assert np.abs(freqs - 0.25).max() < 3 * se

    def test_update_order_invariant(self, rng):
        rewards = [3.0, -1.0, 7.0, 2.0]
        a = TsAgent()
        a.reset(1, rng)
        feed(a, 0, rewards)
        b = TsAgent()
        b.reset(1, rng)
        feed(b, 0, rewards[::-1])
        for field in ("mu", "lam", "alpha", "beta"):
            assert getattr(a, field)[0] == pytest.approx(getattr(b, field)[0], rel=1e-12)

    def test_posterior_concentrates(self):
        agent = TsAgent()
        agent.reset(2, np.random.default_rng(1))
        feed(agent, 0, [10.0] * 50)
        feed(agent, 1, [0.0] * 50)
        picks = [agent.act(101) for _ in range(200)]
        assert sum(c == 0 for c in picks) >= 198

    def test_config_validated(self):
        with pytest.raises(DomainError):
            TsConfig(lambda0=0.0)


class TestEpsGreedy:
    def test_warm_phase(self, rng):
        agent = EpsGreedyAgent()
        agent.reset(2, rng)
        assert [agent.act(1), agent.act(2)] == [0, 1]

    def test_zero_eps_is_pure_greedy(self):
        # Identical decisions regardless of the coin stream.
        results = []
        for seed in (0, 1, 2):
            agent = EpsGreedyAgent(EpsConfig(0.0))
            agent.reset(2, np.random.default_rng(seed))
            feed(agent, 0, [1.0])
            feed(agent, 1, [2.0])
            results.append([agent.act(t) for t in range(3, 40)])
        assert results[0] == results[1] == results[2]
        assert set(results[0]) == {1}

    def test_full_eps_is_uniform(self):
        agent = EpsGreedyAgent(EpsConfig(1.0))
        agent.reset(4, np.random.default_rng(5))
        for arm in range(4):
            agent.observe(arm + 1, arm, float(arm))
        picks = np.array([agent.act(10) for _ in range(10_000)])
        freqs = np.bincount(picks, minlength=4) / picks.size
        se = math.sqrt(0.25 * 0.75 / picks.size)
        assert np.abs(freqs - 0.25).max() < 3 * se

    def test_explore_draws_over_all_arms(self):
        # The exploration draw includes the greedy arm.
        agent = EpsGreedyAgent(EpsConfig(1.0))
        agent.reset(2, np.random.default_rng(7))
        feed(agent, 0, [10.0])
        feed(agent, 1, [0.0])
        picks = [agent.act(5) for _ in range(2000)]
        assert 0 in picks and 1 in picks

    def test_ties_resolve_to_lowest(self, rng):
        agent = EpsGreedyAgent(EpsConfig(0.0))
        agent.reset(3, rng)
        for arm in range(3):
            agent.observe(arm + 1, arm, 4.0)
        assert agent.act(4) == 0

    def test_config_validated(self):
        with pytest.raises(DomainError):
            EpsConfig(1.5)


class TestReplay:
    STEPS = [Step(1, 0, 5.0), Step(2, 1, -2.0), Step(3, 0, 7.0)]

    def test_reissues_recorded_choices(self, rng):
        agent = ReplayAgent(self.STEPS)
        agent.reset(2, rng)
        assert [agent.act(t) for t in (1, 2, 3)] == [0, 1, 0]

    def test_matching_rewards_accepted(self, rng):
        agent = ReplayAgent(self.STEPS)
        agent.reset(2, rng)
        for s in self.STEPS:
            agent.observe(s.round, s.choice, s.reward)

    def test_reward_divergence_raises(self, rng):
        agent = ReplayAgent(self.STEPS)
        agent.reset(2, rng)
        with pytest.raises(ReplayIntegrityError):
            agent.observe(1, 0, 5.1)

    def test_beyond_recorded_range_raises(self, rng):
        agent = ReplayAgent(self.STEPS)
        agent.reset(2, rng)
        with pytest.raises(DomainError):
            agent.act(4)


class TestSimulated:
    def test_zero_temperature_uniform(self):
        agent = SimulatedChoiceAgent(
            Model.SM1, SmParams(0.0, order=Model.SM1), stationary2_learner()
        )
        agent.reset(2, np.random.default_rng(11))
        picks = np.array([agent.act(1) for _ in range(10_000)])
        se = 0.5 / 100.0
        assert abs(picks.mean() - 0.5) < 3 * se

    def test_seeded_reproducibility(self):
        def play(seed):
            agent = SimulatedChoiceAgent(
                Model.SM3, SmParams(0.5, phi=0.3, rho=1.0), stationary2_learner()
            )
            agent.reset(2, np.random.default_rng(seed))
            out = []
            for t in range(1, 11):
                arm = agent.act(t)
                agent.observe(t, arm, float(t))
                out.append(arm)
            return out

        assert play(4) == play(4)

    def test_qcare_warm_pulls_each_arm(self, rng):
        agent = SimulatedChoiceAgent(
            Model.QCARE, QcareParams(0.5), stationary2_learner()
        )
        agent.reset(2, rng)
        assert agent.act(1) == 0
        agent.observe(1, 0, 1.0)
        assert agent.act(2) == 1
