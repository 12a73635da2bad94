import dataclasses

import numpy as np
import pytest

from banditlab.domain import Step
from banditlab.learner import (
    belief_trace,
    default_learner,
    drift,
    init_beliefs,
    observe,
    restless4_learner,
    stationary2_learner,
    trace_arrays,
)


class TestPresets:
    def test_stationary_preset(self):
        cfg = stationary2_learner()
        assert cfg.obs_variance == 10.0
        assert cfg.diffusion_variance == 0.0
        assert cfg.decay == 1.0
        assert cfg.long_run_mean == 0.0
        assert cfg.init_mean == 0.0
        assert cfg.init_variance == 100.0

    def test_restless_preset(self):
        cfg = restless4_learner()
        assert cfg.obs_variance == 4.0
        assert cfg.diffusion_variance == 2.8
        assert cfg.decay == 0.9836
        assert cfg.long_run_mean == 50.0
        assert cfg.init_mean == 50.0
        assert cfg.init_variance == 16.0

    def test_default_learner_matches_variant(self, stat_spec, rest_spec):
        assert default_learner(stat_spec) == stationary2_learner()
        assert default_learner(rest_spec) == restless4_learner()

    def test_init_all_arms_identical(self):
        state = init_beliefs(restless4_learner(), 4)
        assert state.Q.tolist() == [50.0] * 4
        assert state.S_sq.tolist() == [16.0] * 4
        assert state.round == 1
        state2 = init_beliefs(stationary2_learner(), 2)
        assert state2.Q.tolist() == [0.0, 0.0]
        assert state2.S_sq.tolist() == [100.0, 100.0]


class TestObserve:
    def test_stationary_first_gain_is_ten_elevenths(self):
        cfg = stationary2_learner()
        state = observe(init_beliefs(cfg, 2), 0, 11.0, cfg)
        assert state.Q[0] == pytest.approx(10.0, abs=1e-12)  # kappa = 100/110
        assert state.S_sq[0] == pytest.approx(100.0 / 11.0, abs=1e-12)
        assert state.Q[1] == 0.0 and state.S_sq[1] == 100.0

    def test_restless_hand_update(self):
        cfg = restless4_learner()
        state = observe(init_beliefs(cfg, 4), 0, 60.0, cfg)
        # kappa = 16 / (16 + 4) = 0.8
        assert state.Q[0] == pytest.approx(58.0, abs=1e-12)
        assert state.S_sq[0] == pytest.approx(3.2, abs=1e-12)

    def test_noiseless_observation_jumps(self):
        cfg = dataclasses.replace(stationary2_learner(), obs_variance=0.0)
        state = observe(init_beliefs(cfg, 2), 1, -7.5, cfg)
        assert state.Q[1] == -7.5
        assert state.S_sq[1] == 0.0

    def test_touches_exactly_one_arm(self):
        cfg = restless4_learner()
        state = observe(init_beliefs(cfg, 4), 2, 99.0, cfg)
        for arm in (0, 1, 3):
            assert state.Q[arm] == 50.0
            assert state.S_sq[arm] == 16.0


class TestDrift:
    def test_restless_hand_drift(self):
        cfg = restless4_learner()
        state = observe(init_beliefs(cfg, 4), 0, 60.0, cfg)
        after = drift(state, cfg)
        assert after.Q[0] == pytest.approx(57.8688, abs=1e-4)
        assert after.S_sq[0] == pytest.approx(5.8959, abs=1e-4)
        assert after.round == state.round + 1

    def test_stationary_drift_is_identity(self):
        cfg = stationary2_learner()
        state = observe(init_beliefs(cfg, 2), 0, 3.0, cfg)
        after = drift(state, cfg)
        assert after.Q.tolist() == state.Q.tolist()
        assert after.S_sq.tolist() == state.S_sq.tolist()
        assert after.round == state.round + 1

    def test_mean_at_long_run_value_is_fixed(self):
        cfg = restless4_learner()
        state = init_beliefs(cfg, 4)
        after = drift(state, cfg)
        assert after.Q.tolist() == [50.0] * 4
        assert after.S_sq[0] != state.S_sq[0]

    def test_variance_converges_to_stationary_point(self):
        cfg = restless4_learner()
        state = init_beliefs(cfg, 4)
        for _ in range(2000):
            state = drift(state, cfg)
        target = cfg.diffusion_variance / (1.0 - cfg.decay**2)
        assert abs(state.S_sq[0] - target) < 1e-6
        assert abs(target - 86.07) < 0.01


class TestTrace:
    def test_empty_prefix_is_init(self):
        cfg = stationary2_learner()
        trace = belief_trace([Step(1, 0, 5.0)], cfg, 2)
        assert trace[0].Q.tolist() == [0.0, 0.0]
        assert trace[0].S_sq.tolist() == [100.0, 100.0]

    def test_two_round_composition(self):
        cfg = restless4_learner()
        steps = [Step(1, 0, 60.0), Step(2, 0, 55.0)]
        trace = belief_trace(steps, cfg, 4)
        assert len(trace) == 2
        assert trace[1].Q[0] == pytest.approx(57.8688, abs=1e-4)
        assert trace[1].S_sq[0] == pytest.approx(5.8959, abs=1e-4)
        # Unchosen arms only drift: Q stays at 50, variance grows.
        assert trace[1].Q[1] == pytest.approx(50.0, abs=1e-12)
        want = cfg.decay**2 * 16.0 + 2.8
        assert trace[1].S_sq[1] == pytest.approx(want, abs=1e-12)

    def test_unchosen_stationary_arm_never_moves(self):
        cfg = stationary2_learner()
        steps = [Step(t, 0, float(t)) for t in range(1, 11)]
        trace = belief_trace(steps, cfg, 2)
        for state in trace:
            assert state.Q[1] == 0.0
            assert state.S_sq[1] == 100.0

    def test_closed_form_variance_schedule(self):
        # With no drift, after n observations of one arm:
        # S_sq = S1*obs / (obs + n*S1).
        cfg = stationary2_learner()
        steps = [Step(t, 0, 1.0) for t in range(1, 11)]
        trace = belief_trace(steps, cfg, 2)
        for n in range(10):
            want = 100.0 * 10.0 / (10.0 + n * 100.0)
            assert trace[n].S_sq[0] == pytest.approx(want, rel=1e-12)

    def test_variance_non_increasing_without_drift(self):
        cfg = stationary2_learner()
        steps = [Step(t, t % 2, float(t * (-1) ** t)) for t in range(1, 11)]
        trace = belief_trace(steps, cfg, 2)
        for a, b in zip(trace, trace[1:]):
            assert b.S_sq[0] <= a.S_sq[0] + 1e-15
            assert b.S_sq[1] <= a.S_sq[1] + 1e-15

    def test_trace_arrays_match_trace(self):
        cfg = restless4_learner()
        rng = np.random.default_rng(4)
        steps = [Step(t, int(rng.integers(4)), float(rng.normal(50, 5))) for t in range(1, 21)]
        trace = belief_trace(steps, cfg, 4)
        Q, S_sq = trace_arrays(steps, cfg, 4)
        assert Q.shape == (20, 4) and S_sq.shape == (20, 4)
        for t, state in enumerate(trace):
            assert np.allclose(Q[t], state.Q)
            assert np.allclose(S_sq[t], state.S_sq)
