"""Kalman-filter belief learner: per-arm posterior mean Q and variance S².

Round order is choose -> observe -> drift, so the belief used at round t+1
has drifted exactly once per elapsed round. Only the chosen arm is updated by
an observation; drift touches every arm.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import DomainError, EnvSpec, Step, Variant


@dataclass(frozen=True)
class LearnerConfig:
    obs_variance: float  # assumed reward noise variance
    diffusion_variance: float
    decay: float
    long_run_mean: float
    init_mean: float
    init_variance: float

    def __post_init__(self) -> None:
        if self.obs_variance < 0 or self.diffusion_variance < 0 or self.init_variance < 0:
            raise DomainError("variances must be >= 0")
        if not (0.0 < self.decay <= 1.0):
            raise DomainError("decay must be in (0, 1]")

    def to_dict(self) -> dict:
        return {
            "obs_variance": self.obs_variance,
            "diffusion_variance": self.diffusion_variance,
            "decay": self.decay,
            "long_run_mean": self.long_run_mean,
            "init_mean": self.init_mean,
            "init_variance": self.init_variance,
        }

    @staticmethod
    def from_dict(d: dict) -> "LearnerConfig":
        return LearnerConfig(**{k: float(v) for k, v in d.items()})


def stationary2_learner() -> LearnerConfig:
    return LearnerConfig(
        obs_variance=10.0,
        diffusion_variance=0.0,
        decay=1.0,
        long_run_mean=0.0,
        init_mean=0.0,
        init_variance=100.0,
    )


def restless4_learner(init_variance: float = 16.0) -> LearnerConfig:
    # The four-armed initial uncertainty is a configurable default (SD 4,
    # equal to the assumed reward noise SD); every report echoes it.
    return LearnerConfig(
        obs_variance=4.0,
        diffusion_variance=2.8,
        decay=0.9836,
        long_run_mean=50.0,
        init_mean=50.0,
        init_variance=init_variance,
    )


def default_learner(spec: EnvSpec) -> LearnerConfig:
    if spec.variant is Variant.STATIONARY2:
        return stationary2_learner()
    return restless4_learner()


@dataclass(frozen=True)
class BeliefState:
    Q: np.ndarray  # posterior mean per arm
    S_sq: np.ndarray  # posterior variance per arm
    round: int

    def sd(self) -> np.ndarray:
        return np.sqrt(self.S_sq)


def init_beliefs(cfg: LearnerConfig, n_arms: int) -> BeliefState:
    if n_arms < 2:
        raise DomainError("n_arms must be >= 2")
    return BeliefState(
        Q=np.full(n_arms, cfg.init_mean, dtype=np.float64),
        S_sq=np.full(n_arms, cfg.init_variance, dtype=np.float64),
        round=1,
    )


def observe(state: BeliefState, arm: int, reward: float, cfg: LearnerConfig) -> BeliefState:
    """Kalman update of the chosen arm; unchosen posteriors equal their priors."""
    if not (0 <= arm < len(state.Q)):
        raise DomainError(f"arm {arm} out of range")
    Q = state.Q.copy()
    S_sq = state.S_sq.copy()
    denom = S_sq[arm] + cfg.obs_variance
    kappa = 1.0 if denom == 0.0 else S_sq[arm] / denom
    Q[arm] = Q[arm] + kappa * (reward - Q[arm])
    S_sq[arm] = (1.0 - kappa) * S_sq[arm]
    return BeliefState(Q=Q, S_sq=S_sq, round=state.round)


def drift(state: BeliefState, cfg: LearnerConfig) -> BeliefState:
    """Between-round decay toward the long-run mean plus diffusion variance."""
    Q = cfg.decay * state.Q + (1.0 - cfg.decay) * cfg.long_run_mean
    S_sq = cfg.decay**2 * state.S_sq + cfg.diffusion_variance
    return BeliefState(Q=Q, S_sq=S_sq, round=state.round + 1)


def belief_trace(
    steps: Sequence[Step], cfg: LearnerConfig, n_arms: int, horizon: int | None = None
) -> list[BeliefState]:
    """Pre-choice belief states for rounds 1..horizon.

    trace[t-1] is the state the agent holds when choosing at round t; it
    reflects every observation from rounds < t, each followed by one drift.
    """
    horizon = len(steps) if horizon is None else horizon
    if len(steps) < horizon:
        raise DomainError("trajectory shorter than requested horizon")
    state = init_beliefs(cfg, n_arms)
    trace = [state]
    for t in range(1, horizon):
        step = steps[t - 1]
        state = drift(observe(state, step.choice, step.reward, cfg), cfg)
        trace.append(state)
    return trace


def trace_arrays(
    steps: Sequence[Step], cfg: LearnerConfig, n_arms: int
) -> tuple[np.ndarray, np.ndarray]:
    """(Q, S_sq) pre-choice traces as [rounds, arms] arrays (fast path)."""
    T = len(steps)
    Q = np.empty((T, n_arms))
    S = np.empty((T, n_arms))
    q = np.full(n_arms, cfg.init_mean)
    s = np.full(n_arms, cfg.init_variance)
    lam, lam2 = cfg.decay, cfg.decay**2
    theta_term = (1.0 - cfg.decay) * cfg.long_run_mean
    for t in range(T):
        Q[t] = q
        S[t] = s
        a = steps[t].choice
        denom = s[a] + cfg.obs_variance
        kappa = 1.0 if denom == 0.0 else s[a] / denom
        q[a] += kappa * (steps[t].reward - q[a])
        s[a] *= 1.0 - kappa
        q = lam * q + theta_term
        s = lam2 * s + cfg.diffusion_variance
    return Q, S
