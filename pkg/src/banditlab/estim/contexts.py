"""Flatten datasets into contiguous arrays for batched likelihood kernels.

A context owns everything the samplers need: per-subject row offsets into
flattened feature arrays, plus a ``loglik`` method mapping an [N, d] matrix
of per-subject parameters to an [N] vector of log-likelihoods in one kernel
call. Contexts are immutable once built; fits share them freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..choicemodels import Model, empirical_stats_trace, qcare_included_rounds
from ..domain import Dataset, DomainError
from ..learner import LearnerConfig, default_learner, trace_arrays

PARAM_NAMES: dict[Model, tuple[str, ...]] = {
    Model.SM1: ("beta",),
    Model.SM2: ("beta", "phi"),
    Model.SM3: ("beta", "phi", "rho"),
    Model.PROBIT: ("w1", "w2", "w3"),
    Model.QCARE: ("alpha",),
}


@dataclass(frozen=True)
class LikContext:
    """Kernel-ready view of one dataset under one choice model."""

    model: Model
    subject_ids: tuple[str, ...]
    offsets: np.ndarray  # int64 [N+1], row ranges per subject
    n_rows: np.ndarray  # int64 [N], likelihood rows contributed per subject
    arrays: dict[str, np.ndarray] = field(repr=False)

    @property
    def n_subjects(self) -> int:
        return len(self.subject_ids)

    @property
    def d(self) -> int:
        return len(PARAM_NAMES[self.model])

    @property
    def param_names(self) -> tuple[str, ...]:
        return PARAM_NAMES[self.model]

    def loglik(self, params: np.ndarray) -> np.ndarray:
        """Per-subject log-likelihood for an [N, d] parameter matrix."""
        p = np.asarray(params, dtype=np.float64)
        if p.ndim == 1:
            # tile, not broadcast_to: the kernels need writable buffers
            p = np.tile(p, (self.n_subjects, 1))
        if p.shape != (self.n_subjects, self.d):
            raise DomainError(
                f"expected parameter matrix of shape {(self.n_subjects, self.d)}, "
                f"got {p.shape}"
            )
        a = self.arrays
        if self.model in (Model.SM1, Model.SM2, Model.SM3):
            beta = np.ascontiguousarray(p[:, 0])
            n = self.n_subjects
            phi = np.ascontiguousarray(p[:, 1]) if self.d > 1 else np.zeros(n)
            rho = np.ascontiguousarray(p[:, 2]) if self.d > 2 else np.zeros(n)
            return kernels.sm_loglik(
                beta, phi, rho, a["Q"], a["S"], a["prev"], a["choice"], self.offsets
            )
        if self.model is Model.PROBIT:
            return kernels.probit_loglik(
                np.ascontiguousarray(p[:, 0]),
                np.ascontiguousarray(p[:, 1]),
                np.ascontiguousarray(p[:, 2]),
                a["V"], a["RU"], a["VTU"], a["chose_first"], self.offsets,
            )
        return kernels.qcare_loglik(
            np.ascontiguousarray(p[:, 0]),
            a["dmu"], a["n_first"], a["n_second"], a["chose_first"],
            a["include"], self.offsets,
        )

    def total_loglik(self, theta: np.ndarray) -> float:
        """Pooled log-likelihood with one shared parameter vector."""
        return float(self.loglik(np.asarray(theta, dtype=np.float64)).sum())


def _sm_subject_blocks(traj_list, cfg: LearnerConfig, n_arms: int):
    qs, ss, prevs, choices = [], [], [], []
    for traj in traj_list:
        Q, S_sq = trace_arrays(traj.steps, cfg, n_arms)
        S = np.sqrt(S_sq)
        T = len(traj.steps)
        prev = np.zeros((T, n_arms), dtype=np.float64)
        ch = np.empty(T, dtype=np.int64)
        for t, step in enumerate(traj.steps):
            ch[t] = step.choice
            if t > 0:
                prev[t, traj.steps[t - 1].choice] = 1.0
        qs.append(Q)
        ss.append(S)
        prevs.append(prev)
        choices.append(ch)
    return (
        np.concatenate(qs, axis=0),
        np.concatenate(ss, axis=0),
        np.concatenate(prevs, axis=0),
        np.concatenate(choices),
    )


def _probit_subject_blocks(traj_list, cfg: LearnerConfig):
    vs, rus, vtus, first = [], [], [], []
    for traj in traj_list:
        Q, S_sq = trace_arrays(traj.steps, cfg, 2)
        S = np.sqrt(S_sq)
        V = Q[:, 0] - Q[:, 1]
        RU = S[:, 0] - S[:, 1]
        TU = np.sqrt(S_sq[:, 0] + S_sq[:, 1])
        if np.any(TU <= 0.0):
            raise DomainError(
                "total uncertainty is zero on some round; features undefined"
            )
        vs.append(V)
        rus.append(RU)
        vtus.append(V / TU)
        first.append(
            np.fromiter(
                (1 if s.choice == 0 else 0 for s in traj.steps),
                dtype=np.uint8,
                count=len(traj.steps),
            )
        )
    return (
        np.concatenate(vs),
        np.concatenate(rus),
        np.concatenate(vtus),
        np.concatenate(first),
    )


def _qcare_subject_blocks(traj_list):
    dmus, n0s, n1s, first, incl = [], [], [], [], []
    for traj in traj_list:
        mu, counts = empirical_stats_trace(traj.steps, 2)
        include = qcare_included_rounds(counts)
        dmus.append(mu[:, 0] - mu[:, 1])
        n0s.append(counts[:, 0].astype(np.float64))
        n1s.append(counts[:, 1].astype(np.float64))
        first.append(
            np.fromiter(
                (1 if s.choice == 0 else 0 for s in traj.steps),
                dtype=np.uint8,
                count=len(traj.steps),
            )
        )
        incl.append(include.astype(np.uint8))
    dmu = np.concatenate(dmus)
    # Excluded rows keep placeholder zeros; the kernel never reads them.
    dmu = np.where(np.isfinite(dmu), dmu, 0.0)
    return (
        dmu,
        np.concatenate(n0s),
        np.concatenate(n1s),
        np.concatenate(first),
        np.concatenate(incl),
    )


def build_context(
    model: Model | str,
    dataset: Dataset,
    learner_cfg: LearnerConfig | None = None,
) -> LikContext:
    """Precompute belief traces and features for every subject in a dataset."""
    model = Model(model)
    cfg = learner_cfg or default_learner(dataset.env_spec)
    n_arms = dataset.env_spec.n_arms
    if model in (Model.PROBIT, Model.QCARE) and n_arms != 2:
        raise DomainError(f"{model.value} likelihood requires a two-armed setting")

    subject_ids = tuple(sorted(dataset.subject_ids()))
    if not subject_ids:
        raise DomainError("empty dataset")
    offsets = np.zeros(len(subject_ids) + 1, dtype=np.int64)
    n_rows = np.zeros(len(subject_ids), dtype=np.int64)

    blocks: list[tuple[np.ndarray, ...]] = []
    for i, sid in enumerate(subject_ids):
        trajs = dataset.subject_trajectories(sid)
        if model in (Model.SM1, Model.SM2, Model.SM3):
            blk = _sm_subject_blocks(trajs, cfg, n_arms)
            rows = blk[3].shape[0]
            n_rows[i] = rows
        elif model is Model.PROBIT:
            blk = _probit_subject_blocks(trajs, cfg)
            rows = blk[0].shape[0]
            n_rows[i] = rows
        else:
            blk = _qcare_subject_blocks(trajs)
            rows = blk[0].shape[0]
            n_rows[i] = int(blk[4].sum())  # only included rounds enter the likelihood
        offsets[i + 1] = offsets[i] + rows
        blocks.append(blk)

    def cat(k: int, dtype=np.float64) -> np.ndarray:
        return np.ascontiguousarray(
            np.concatenate([b[k] for b in blocks], axis=0), dtype=dtype
        )

    if model in (Model.SM1, Model.SM2, Model.SM3):
        arrays = {
            "Q": cat(0),
            "S": cat(1),
            "prev": cat(2),
            "choice": cat(3, np.int64),
        }
    elif model is Model.PROBIT:
        arrays = {
            "V": cat(0),
            "RU": cat(1),
            "VTU": cat(2),
            "chose_first": cat(3, np.uint8),
        }
    else:
        arrays = {
            "dmu": cat(0),
            "n_first": cat(1),
            "n_second": cat(2),
            "chose_first": cat(3, np.uint8),
            "include": cat(4, np.uint8),
        }
    return LikContext(
        model=model,
        subject_ids=subject_ids,
        offsets=offsets,
        n_rows=n_rows,
        arrays=arrays,
    )
