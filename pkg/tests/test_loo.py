"""Leave-one-subject-out estimates: degenerate cases, guards, model ordering."""

import numpy as np
import pytest

from banditlab.domain import DomainError, stationary2_spec
from banditlab.estim import loo as loo_mod
from banditlab.estim.hier import fit_hier
from banditlab.estim.loo import compare, psis_loo, psis_loo_from_draws
from banditlab.runner import RunPlan, run


class TestDegenerateDraws:
    def test_constant_likelihood_is_exact(self):
        # With no variation across draws the importance weights are uniform
        # and each subject's score is exactly its log-likelihood.
        point = np.array([-1.0, -2.0, -0.5])
        L = np.tile(point, (200, 1))
        rep = psis_loo_from_draws(L, n_rows=np.array([10, 10, 15]))
        np.testing.assert_allclose(rep.pointwise, point, atol=1e-12)
        assert rep.elpd == pytest.approx(-3.5, abs=1e-12)
        assert rep.elpd_per_choice == pytest.approx(-3.5 / 35, abs=1e-12)
        assert rep.khat.tolist() == [0.0, 0.0, 0.0]
        assert rep.flagged == []
        assert rep.n_draws == 200
        assert rep.n_choices == 35

    def test_default_subject_ids(self):
        rep = psis_loo_from_draws(np.full((120, 2), -1.0), n_rows=np.array([5, 5]))
        assert rep.subject_ids == ("s0000", "s0001")


class TestGuards:
    def test_too_few_draws_refused(self):
        with pytest.raises(DomainError, match="too few"):
            psis_loo_from_draws(np.full((99, 2), -1.0), n_rows=np.array([5, 5]))

    def test_non_finite_refused(self):
        L = np.full((150, 2), -1.0)
        L[3, 1] = np.nan
        with pytest.raises(DomainError, match="non-finite"):
            psis_loo_from_draws(L, n_rows=np.array([5, 5]))

    def test_wrong_shape_refused(self):
        with pytest.raises(DomainError, match="draws, subjects"):
            psis_loo_from_draws(np.zeros(150), n_rows=np.array([5]))

    def test_high_khat_flags_subject(self, monkeypatch):
        monkeypatch.setattr(loo_mod, "_fit_gpd_moments", lambda exceed: (0.9, 1.0))
        rng = np.random.default_rng(0)
        L = rng.normal(-3.0, 1.0, size=(300, 4))
        rep = psis_loo_from_draws(L, n_rows=np.full(4, 10), subject_ids=tuple("abcd"))
        assert rep.flagged == list("abcd")
        assert np.all(rep.khat > loo_mod.KHAT_WARN)


@pytest.fixture(scope="module")
def reports():
    ds = run(
        RunPlan(
            env_spec=stationary2_spec(),
            agent_kind="sm3",
            agent_params={"beta": 0.2, "phi": 0.9, "rho": 5.0},
            n_trials=40,
            trials_per_subject=5,
            master_seed=2,
        )
    )
    out = {}
    for m in ("sm1", "sm3"):
        post = fit_hier(m, ds, chains=2, iters=400, warmup=200, seed=5)
        out[m] = psis_loo(post)
    return out


class TestAgainstFits:

    def test_report_wiring(self, reports):
        rep = reports["sm1"]
        assert rep.model == "sm1"
        assert rep.n_draws == 2 * 200
        assert rep.n_subjects == 8
        assert rep.n_choices == 40 * 10
        assert rep.elpd == pytest.approx(rep.pointwise.sum())
        assert rep.se > 0

    def test_richer_model_predicts_better_on_its_own_data(self, reports):
        assert reports["sm3"].elpd_per_choice > reports["sm1"].elpd_per_choice

    def test_compare_ranks_best_first(self, reports):
        rows = compare([reports["sm1"], reports["sm3"]])
        assert [r["model"] for r in rows] == ["sm3", "sm1"]
        assert rows[0]["elpd_diff"] == 0.0 and rows[0]["diff_se"] == 0.0
        assert rows[1]["elpd_diff"] < 0 and rows[1]["diff_se"] > 0

    def test_to_dict_round_trips_key_fields(self, reports):
        d = reports["sm3"].to_dict()
        assert d["model"] == "sm3"
        assert len(d["pointwise"]) == 8
        assert d["khat_max"] == pytest.approx(float(reports["sm3"].khat.max()))
