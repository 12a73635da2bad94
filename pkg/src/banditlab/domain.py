"""Shared vocabulary types: environment specs, trajectories, datasets.

All domain types are immutable value objects. Arms are 0-indexed everywhere
inside the package; the 1-indexed labels used by the two-armed task exist only
at I/O boundaries (store, LLM prompts, session service).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class Variant(str, enum.Enum):
    STATIONARY2 = "stationary2"
    RESTLESS4 = "restless4"


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class EnvSpec:
    """Parameters of a bandit environment.

    variant drives the defaults: the two-armed task draws fresh means per
    game from Normal(0, mean_prior_variance) and plays short games; the
    four-armed task runs one long game whose means follow a decaying
    Gaussian random walk around long_run_mean.
    """

    variant: Variant
    n_arms: int
    horizon: int
    games_per_session: int
    mean_prior_variance: float
    reward_variance: float
    decay: float
    long_run_mean: float
    diffusion_variance: float
    initial_means: tuple[float, ...] | None
    integer_rewards: bool = True

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise DomainError("horizon must be >= 1")
        if self.n_arms < 2:
            raise DomainError("n_arms must be >= 2")
        if self.games_per_session < 1:
            raise DomainError("games_per_session must be >= 1")
        for name in ("mean_prior_variance", "reward_variance", "diffusion_variance"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")
        if not (0.0 < self.decay <= 1.0):
            raise DomainError("decay must be in (0, 1]")
        if self.variant is Variant.RESTLESS4:
            if self.initial_means is None or len(self.initial_means) != self.n_arms:
                raise DomainError("initial_means length must equal n_arms")
        if not all(
            math.isfinite(x)
            for x in (
                self.mean_prior_variance,
                self.reward_variance,
                self.decay,
                self.long_run_mean,
                self.diffusion_variance,
            )
        ):
            raise DomainError("spec parameters must be finite")

    @property
    def external_arm_base(self) -> int:
        """First arm label shown to humans/LLMs (1 for the 2-armed task)."""
        return 1 if self.variant is Variant.STATIONARY2 else 0

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "n_arms": self.n_arms,
            "horizon": self.horizon,
            "games_per_session": self.games_per_session,
            "mean_prior_variance": self.mean_prior_variance,
            "reward_variance": self.reward_variance,
            "decay": self.decay,
            "long_run_mean": self.long_run_mean,
            "diffusion_variance": self.diffusion_variance,
            "initial_means": list(self.initial_means) if self.initial_means else None,
            "integer_rewards": self.integer_rewards,
        }

    @staticmethod
    def from_dict(d: dict) -> "EnvSpec":
        means = d.get("initial_means")
        return EnvSpec(
            variant=Variant(d["variant"]),
            n_arms=int(d["n_arms"]),
            horizon=int(d["horizon"]),
            games_per_session=int(d["games_per_session"]),
            mean_prior_variance=float(d["mean_prior_variance"]),
            reward_variance=float(d["reward_variance"]),
            decay=float(d["decay"]),
            long_run_mean=float(d["long_run_mean"]),
            diffusion_variance=float(d["diffusion_variance"]),
            initial_means=tuple(float(x) for x in means) if means else None,
            integer_rewards=bool(d.get("integer_rewards", True)),
        )


def stationary2_spec(
    horizon: int = 10,
    games_per_session: int = 20,
    mean_prior_variance: float = 100.0,
    reward_variance: float = 10.0,
    integer_rewards: bool = True,
) -> EnvSpec:
    return EnvSpec(
        variant=Variant.STATIONARY2,
        n_arms=2,
        horizon=horizon,
        games_per_session=games_per_session,
        mean_prior_variance=mean_prior_variance,
        reward_variance=reward_variance,
        decay=1.0,
        long_run_mean=0.0,
        diffusion_variance=0.0,
        initial_means=None,
        integer_rewards=integer_rewards,
    )


def restless4_spec(
    horizon: int = 300,
    reward_variance: float = 4.0,
    decay: float = 0.9836,
    long_run_mean: float = 50.0,
    diffusion_variance: float = 2.8,
    initial_means: tuple[float, ...] = (20.0, 40.0, 60.0, 80.0),
    integer_rewards: bool = True,
) -> EnvSpec:
    return EnvSpec(
        variant=Variant.RESTLESS4,
        n_arms=4,
        horizon=horizon,
        games_per_session=1,
        mean_prior_variance=0.0,
        reward_variance=reward_variance,
        decay=decay,
        long_run_mean=long_run_mean,
        diffusion_variance=diffusion_variance,
        initial_means=initial_means,
        integer_rewards=integer_rewards,
    )


@dataclass(frozen=True)
class RewardGroup:
    """Pre-generated latent means and realized rewards, [n_arms x horizon].

    Every subject assigned to a group sees the same realized rewards; column
    t-1 holds round t.
    """

    group_id: int
    means: np.ndarray
    rewards: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "means", np.asarray(self.means, dtype=np.float64))
        object.__setattr__(self, "rewards", np.asarray(self.rewards, dtype=np.float64))
        if self.means.shape != self.rewards.shape or self.means.ndim != 2:
            raise DomainError("means and rewards must share an (arms, rounds) shape")
        self.means.setflags(write=False)
        self.rewards.setflags(write=False)

    @property
    def n_arms(self) -> int:
        return self.means.shape[0]

    @property
    def horizon(self) -> int:
        return self.means.shape[1]

    def digest(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(self.means.tobytes())
        h.update(self.rewards.tobytes())
        return h.hexdigest()


class Step(NamedTuple):
    round: int
    choice: int  # 0-indexed arm
    reward: float


@dataclass(frozen=True)
class Trajectory:
    """One agent's record for one trial (one game of the two-armed task, or
    one full session of the four-armed task)."""

    subject_id: str
    trial_index: int
    steps: tuple[Step, ...]
    true_means: tuple[float, ...] | None = None  # stationary trials
    group_id: int | None = None  # restless trials

    def choices(self) -> list[int]:
        return [s.choice for s in self.steps]

    def rewards(self) -> list[float]:
        return [s.reward for s in self.steps]


@dataclass
class Dataset:
    env_spec: EnvSpec
    agent_label: str
    trajectories: list[Trajectory]
    subjects: dict[str, list[int]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.subjects:
            self.subjects = group_by_subject(self.trajectories)

    @property
    def n_choices(self) -> int:
        return sum(len(t.steps) for t in self.trajectories)

    def subject_trajectories(self, subject_id: str) -> list[Trajectory]:
        return [self.trajectories[i] for i in self.subjects[subject_id]]

    def subject_ids(self) -> list[str]:
        return list(self.subjects.keys())


def group_by_subject(trajectories: list[Trajectory]) -> dict[str, list[int]]:
    out: dict[str, list[int]] = {}
    for i, t in enumerate(trajectories):
        out.setdefault(t.subject_id, []).append(i)
    return out


def validate_dataset(d: Dataset) -> list[str]:
    """Return human-readable invariant violations; empty list means valid.

    Violations are data, not errors: callers decide whether to proceed.
    """
    out: list[str] = []
    spec = d.env_spec
    for i, traj in enumerate(d.trajectories):
        label = f"trajectory {i} (subject {traj.subject_id}, trial {traj.trial_index})"
        if len(traj.steps) != spec.horizon:
            out.append(f"{label}: round gap: {len(traj.steps)} steps, horizon {spec.horizon}")
        for j, step in enumerate(traj.steps):
            if step.round != j + 1:
                out.append(f"{label}: round gap at position {j}: round {step.round}")
                break
        for step in traj.steps:
            if not (0 <= step.choice < spec.n_arms):
                out.append(
                    f"{label}: choice out of range at round {step.round}: {step.choice}"
                )
            if not math.isfinite(step.reward):
                out.append(f"{label}: non-finite reward at round {step.round}")
        if spec.variant is Variant.STATIONARY2:
            if traj.true_means is None or len(traj.true_means) != spec.n_arms:
                out.append(f"{label}: stationary trial must carry {spec.n_arms} true means")
        else:
            if traj.group_id is None:
                out.append(f"{label}: restless trial must carry a group id")
    seen: dict[int, str] = {}
    for sid, idxs in d.subjects.items():
        for i in idxs:
            if i in seen:
                out.append(f"trial {i} assigned to both subject {seen[i]} and {sid}")
            seen[i] = sid
            if not (0 <= i < len(d.trajectories)):
                out.append(f"subject {sid} references missing trial {i}")
    for i in range(len(d.trajectories)):
        if i not in seen:
            out.append(f"trial {i} not assigned to any subject")
    return out
