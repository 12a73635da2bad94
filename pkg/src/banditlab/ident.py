"""Identifiability diagnostics: difference design matrices and rank checks.

For a K-armed softmax model the round-t rows are the feature differences
(I_k - I_K) against the last arm; the probit variant contributes its single
feature row per round. Full column rank of the stacked matrix makes the
parameters identifiable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .choicemodels import Model, prev_choice_at
from .domain import Dataset, DomainError, Trajectory
from .learner import LearnerConfig, trace_arrays


@dataclass
class RankReport:
    rank: int
    full_rank: bool
    singular_values: np.ndarray
    d: int


def sm_feature_rows(
    trajectory: Trajectory, cfg: LearnerConfig, n_arms: int, order: Model = Model.SM3
) -> np.ndarray:
    """Per-round, per-arm feature vectors [T, K, d]."""
    steps = trajectory.steps
    Q, S_sq = trace_arrays(steps, cfg, n_arms)
    S = np.sqrt(S_sq)
    T = len(steps)
    if order is Model.SM1:
        feats = Q[:, :, None]
    elif order is Model.SM2:
        feats = np.stack([Q, S], axis=2)
    else:
        prev = np.zeros((T, n_arms))
        for t in range(1, T + 1):
            pc = prev_choice_at(steps, t)
            if pc is not None:
                prev[t - 1, pc] = 1.0
        feats = np.stack([Q, S, prev], axis=2)
    return feats


def probit_feature_rows(trajectory: Trajectory, cfg: LearnerConfig) -> np.ndarray:
    """Per-round probit features [T, 3]: V, RU, V/TU."""
    Q, S_sq = trace_arrays(trajectory.steps, cfg, 2)
    S = np.sqrt(S_sq)
    V = Q[:, 0] - Q[:, 1]
    RU = S[:, 0] - S[:, 1]
    TU = np.sqrt(S_sq[:, 0] + S_sq[:, 1])
    if np.any(TU <= 0):
        raise DomainError("degenerate features: TU must be positive")
    return np.column_stack([V, RU, V / TU])


def build_design(features: np.ndarray) -> np.ndarray:
    """Difference design matrix [(K-1)*T, d] from per-arm features [T, K, d];
    a [T, d] input (single-row variant) is returned stacked as-is."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim == 2:
        return feats
    if feats.ndim != 3:
        raise DomainError("features must be [T, d] or [T, K, d]")
    T, K, d = feats.shape
    if K < 2:
        raise DomainError("need at least 2 arms")
    diffs = feats[:, : K - 1, :] - feats[:, K - 1 :, :]
    return diffs.reshape(T * (K - 1), d)


def model_design(
    model: Model, trajectory: Trajectory, cfg: LearnerConfig, n_arms: int
) -> np.ndarray:
    if model is Model.PROBIT:
        return build_design(probit_feature_rows(trajectory, cfg))
    if model in (Model.SM1, Model.SM2, Model.SM3):
        return build_design(sm_feature_rows(trajectory, cfg, n_arms, model))
    raise DomainError(f"no design matrix for model {model}")


def rank_check(matrix: np.ndarray, d: int | None = None) -> RankReport:
    """Numerical rank: singular values above max(rows, d) * eps * s_max."""
    X = np.asarray(matrix, dtype=np.float64)
    if X.size == 0:
        return RankReport(rank=0, full_rank=False, singular_values=np.array([]), d=d or 0)
    d = X.shape[1] if d is None else d
    sv = np.linalg.svd(X, compute_uv=False)
    tol = max(X.shape[0], d) * np.finfo(np.float64).eps * sv[0]
    rank = int((sv > tol).sum())
    return RankReport(rank=rank, full_rank=rank == d, singular_values=sv, d=d)


def dataset_ident_report(
    model: Model | str, dataset: Dataset, cfg: LearnerConfig | None = None
) -> dict:
    """Per-subject rank checks; a dataset is stamped identifiable iff every
    subject's stacked design has full column rank."""
    model = Model(model)
    if cfg is None:
        from .learner import default_learner

        cfg = default_learner(dataset.env_spec)
    n_arms = dataset.env_spec.n_arms
    per_subject = {}
    for sid in dataset.subject_ids():
        blocks = [
            model_design(model, traj, cfg, n_arms) for traj in dataset.subject_trajectories(sid)
        ]
        report = rank_check(np.vstack(blocks))
        per_subject[sid] = report
    deficient = sorted(s for s, r in per_subject.items() if not r.full_rank)
    return {
        "identifiable": not deficient,
        "rank_deficient_subjects": deficient,
        "per_subject": per_subject,
    }
