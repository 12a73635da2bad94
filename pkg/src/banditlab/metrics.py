"""Model-free metrics: exploitation rate and cumulative regret curves."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .domain import Dataset, DomainError, RewardGroup, Variant


@dataclass
class RegretCurve:
    rounds: np.ndarray  # 1..T
    mean: np.ndarray  # mean cumulative regret at each round
    se: np.ndarray  # standard error across trials
    n_trials: int

    def final(self) -> float:
        return float(self.mean[-1])


@dataclass
class ExploitationReport:
    overall: float
    windows: dict[int, float]  # cumulative-window rates at tau = 10, 20, ...
    by_round: np.ndarray  # mean exploitative flag per round (NaN in warm phase)
    n_trials: int


def _curve(per_trial_cum: np.ndarray) -> RegretCurve:
    n, T = per_trial_cum.shape
    mean = per_trial_cum.mean(axis=0)
    if n > 1:
        se = per_trial_cum.std(axis=0, ddof=1) / np.sqrt(n)
    else:
        se = np.zeros(T)
    return RegretCurve(rounds=np.arange(1, T + 1), mean=mean, se=se, n_trials=n)


def bayes_regret(dataset: Dataset) -> RegretCurve:
    """Cumulative (best latent mean - chosen latent mean), averaged over trials."""
    if dataset.env_spec.variant is not Variant.STATIONARY2:
        raise DomainError("Bayesian regret is defined for the stationary task")
    T = dataset.env_spec.horizon
    rows = []
    for traj in dataset.trajectories:
        if traj.true_means is None:
            raise DomainError(f"trial {traj.trial_index} carries no true means")
        means = np.asarray(traj.true_means)
        best = means.max()
        per_round = np.array([best - means[s.choice] for s in traj.steps])
        if len(per_round) != T:
            raise DomainError("trajectory shorter than horizon")
        rows.append(np.cumsum(per_round))
    return _curve(np.vstack(rows))


def realized_regret(dataset: Dataset, groups: dict[int, RewardGroup]) -> RegretCurve:
    """Cumulative (best realized reward - received reward), averaged over trials."""
    if dataset.env_spec.variant is not Variant.RESTLESS4:
        raise DomainError("realized regret is defined for the restless task")
    rows = []
    for traj in dataset.trajectories:
        if traj.group_id not in groups:
            raise DomainError(f"unknown reward group {traj.group_id}")
        best = groups[traj.group_id].rewards.max(axis=0)
        per_round = np.array([best[s.round - 1] - s.reward for s in traj.steps])
        rows.append(np.cumsum(per_round))
    return _curve(np.vstack(rows))


def exploitation_flags(dataset: Dataset) -> np.ndarray:
    """Per (trial, round) exploitation flags as floats; NaN marks excluded
    warm-phase rounds (the first n_arms rounds of every trial).

    A round is exploitative iff the chosen arm has been observed and its
    empirical mean reward is maximal among arms observed so far (ties count).
    """
    K = dataset.env_spec.n_arms
    T = dataset.env_spec.horizon
    flags = np.full((len(dataset.trajectories), T), np.nan)
    for i, traj in enumerate(dataset.trajectories):
        sums = np.zeros(K)
        counts = np.zeros(K)
        for step in traj.steps:
            t, a = step.round, step.choice
            if t > K:
                observed = counts > 0
                if not observed[a]:
                    flags[i, t - 1] = 0.0
                else:
                    means = sums[observed] / counts[observed]
                    own = sums[a] / counts[a]
                    flags[i, t - 1] = 1.0 if own >= means.max() - 1e-12 else 0.0
            sums[a] += step.reward
            counts[a] += 1
    return flags


def exploitation_rate(
    dataset: Dataset, windows: tuple[int, ...] | None = None
) -> ExploitationReport:
    T = dataset.env_spec.horizon
    if windows is None:
        windows = tuple(range(10, T + 1, 10))
    flags = exploitation_flags(dataset)
    overall = float(np.nanmean(flags))
    # Warm-phase columns are all-NaN by construction; nanmean there is a
    # deliberate NaN, not an accident worth a warning.
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", "Mean of empty slice", RuntimeWarning)
        by_round = np.nanmean(flags, axis=0) if len(flags) else np.full(T, np.nan)
        window_rates = {}
        for tau in windows:
            if 1 <= tau <= T:
                block = flags[:, :tau]
                window_rates[tau] = (
                    float(np.nanmean(block)) if np.isfinite(block).any() else float("nan")
                )
    return ExploitationReport(
        overall=overall, windows=window_rates, by_round=by_round, n_trials=len(flags)
    )


def curves_to_csv(curves: dict[str, RegretCurve], path: str | Path) -> None:
    """One row per round: x, then mean and SE columns per agent label."""
    labels = list(curves)
    T = max(len(c.rounds) for c in curves.values())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["x"]
        for lab in labels:
            header += [f"{lab}_mean", f"{lab}_se"]
        w.writerow(header)
        for t in range(T):
            row: list = [t + 1]
            for lab in labels:
                c = curves[lab]
                if t < len(c.rounds):
                    row += [f"{c.mean[t]:.6f}", f"{c.se[t]:.6f}"]
                else:
                    row += ["", ""]
            w.writerow(row)


def exploitation_to_csv(reports: dict[str, ExploitationReport], path: str | Path) -> None:
    labels = list(reports)
    taus = sorted({tau for r in reports.values() for tau in r.windows})
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x"] + [f"{lab}_rate" for lab in labels])
        for tau in taus:
            w.writerow([tau] + [f"{reports[lab].windows.get(tau, float('nan')):.6f}" for lab in labels])
