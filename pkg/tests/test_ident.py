"""Design-matrix construction and numerical rank checks."""

import numpy as np
import pytest

from banditlab.choicemodels import Model
from conftest import make_traj
from banditlab.domain import DomainError
from banditlab.ident import (
    build_design,
    dataset_ident_report,
    model_design,
    probit_feature_rows,
    rank_check,
    sm_feature_rows,
)
from banditlab.learner import default_learner, stationary2_learner
from banditlab.runner import RunPlan, run


class TestBuildDesign:
    def test_two_arm_three_round_shape(self):
        feats = np.arange(2 * 3 * 3, dtype=float).reshape(3, 2, 3)
        X = build_design(feats)
        assert X.shape == (3, 3)
        np.testing.assert_allclose(X, feats[:, 0, :] - feats[:, 1, :])

    def test_four_arm_stacking_order(self):
        # Rows for round t cover arms 1..K-1 against the base arm K.
        feats = np.zeros((2, 4, 2))
        for k in range(4):
            feats[:, k, :] = k
        X = build_design(feats)
        assert X.shape == (6, 2)
        np.testing.assert_allclose(X[:3, 0], [-3.0, -2.0, -1.0])

    def test_identical_arms_give_zero_matrix(self):
        feats = np.ones((5, 3, 4))
        assert np.all(build_design(feats) == 0.0)

    def test_single_row_variant_passes_through(self):
        rows = np.arange(12, dtype=float).reshape(4, 3)
        np.testing.assert_array_equal(build_design(rows), rows)

    def test_bad_shapes(self):
        with pytest.raises(DomainError):
            build_design(np.zeros(4))
        with pytest.raises(DomainError):
            build_design(np.zeros((3, 1, 2)))

    def test_real_trace_rows_nonzero_after_first_observation(self, stat_spec):
        # Before any pull the arms share the prior, so row 1 is zero; one
        # asymmetric observation separates them for every later round.
        traj = make_traj([0, 1, 0, 1], [8.0, 1.0, 6.0, 2.0])
        feats = sm_feature_rows(traj, stationary2_learner(), 2, Model.SM3)
        X = build_design(feats)
        assert np.all(X[0] == 0.0)
        assert np.all(np.abs(X[1:, 0]) > 0)


class TestRankCheck:
    def test_identity_full_rank(self):
        rep = rank_check(np.eye(3))
        assert rep.rank == 3 and rep.full_rank
        assert rep.d == 3

    def test_zero_matrix_rank_zero(self):
        rep = rank_check(np.zeros((6, 3)))
        assert rep.rank == 0 and not rep.full_rank

    def test_constant_rows_rank_one(self):
        X = np.tile([1.0, 2.0, 3.0], (8, 1))
        rep = rank_check(X)
        assert rep.rank == 1 and not rep.full_rank

    def test_rank_deficient_by_column_dependence(self):
        X = np.random.default_rng(0).normal(size=(10, 2))
        rep = rank_check(np.column_stack([X, X[:, 0] + X[:, 1]]))
        assert rep.rank == 2 and not rep.full_rank

    def test_explicit_d_overrides_width(self):
        rep = rank_check(np.eye(2), d=3)
        assert rep.rank == 2 and not rep.full_rank

    def test_empty_matrix(self):
        rep = rank_check(np.zeros((0, 3)))
        assert rep.rank == 0 and not rep.full_rank

    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(9, 3))
        perm = rng.permutation(9)
        assert rank_check(X).rank == rank_check(X[perm]).rank

    def test_row_scaling_invariance(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(9, 3))
        scales = rng.uniform(0.5, 3.0, size=9) * rng.choice([-1.0, 1.0], size=9)
        assert rank_check(X * scales[:, None]).rank == rank_check(X).rank

    def test_full_rank_in_99_of_100_simulated_games(self, stat_spec):
        cfg = default_learner(stat_spec)
        hits = 0
        for seed in range(100):
            ds = run(
                RunPlan(
                    env_spec=stat_spec,
                    agent_kind="ts",
                    n_trials=1,
                    master_seed=seed,
                )
            )
            X = model_design(Model.SM3, ds.trajectories[0], cfg, 2)
            if rank_check(X).full_rank:
                hits += 1
        assert hits >= 99


class TestFeatureRows:
    def test_sm_orders_dimension(self, stat_spec):
        traj = make_traj([0, 1, 0], [5.0, 2.0, 4.0])
        cfg = stationary2_learner()
        assert sm_feature_rows(traj, cfg, 2, Model.SM1).shape == (3, 2, 1)
        assert sm_feature_rows(traj, cfg, 2, Model.SM2).shape == (3, 2, 2)
        assert sm_feature_rows(traj, cfg, 2, Model.SM3).shape == (3, 2, 3)

    def test_sm3_prev_choice_indicator(self, stat_spec):
        traj = make_traj([1, 0, 1], [5.0, 2.0, 4.0])
        feats = sm_feature_rows(traj, stationary2_learner(), 2, Model.SM3)
        np.testing.assert_array_equal(feats[0, :, 2], [0.0, 0.0])
        np.testing.assert_array_equal(feats[1, :, 2], [0.0, 1.0])
        np.testing.assert_array_equal(feats[2, :, 2], [1.0, 0.0])

    def test_probit_rows_match_belief_arithmetic(self, ):
        traj = make_traj([0, 1, 0], [5.0, 2.0, 4.0])
        cfg = stationary2_learner()
        rows = probit_feature_rows(traj, cfg)
        assert rows.shape == (3, 3)
        feats = sm_feature_rows(traj, cfg, 2, Model.SM2)
        V = feats[:, 0, 0] - feats[:, 1, 0]
        RU = feats[:, 0, 1] - feats[:, 1, 1]
        TU = np.sqrt(feats[:, 0, 1] ** 2 + feats[:, 1, 1] ** 2)
        np.testing.assert_allclose(rows, np.column_stack([V, RU, V / TU]))


class TestDatasetReport:
    def test_identifiable_dataset(self, stat_spec):
        ds = run(RunPlan(env_spec=stat_spec, agent_kind="ts", n_trials=4, master_seed=0))
        report = dataset_ident_report(Model.SM3, ds)
        assert report["identifiable"] is True
        assert report["rank_deficient_subjects"] == []
        assert set(report["per_subject"]) == set(ds.subject_ids())

    def test_accepts_model_name_string(self, stat_spec):
        ds = run(RunPlan(env_spec=stat_spec, agent_kind="ts", n_trials=2, master_seed=0))
        assert dataset_ident_report("sm1", ds)["identifiable"] is True

    def test_flags_degenerate_subject(self, stat_spec):
        from banditlab.domain import Dataset

        # A one-round record cannot span three feature dimensions.
        import dataclasses

        spec = dataclasses.replace(stat_spec, horizon=1)
        ds = Dataset(
            env_spec=spec,
            agent_label="tiny",
            trajectories=[make_traj([0], [1.0])],
        )
        report = dataset_ident_report(Model.SM3, ds)
        assert report["identifiable"] is False
        assert report["rank_deficient_subjects"] == ["s0000"]
