"""Algorithmic baselines, a replay agent, and a model-simulated agent.

Every agent follows the same protocol: reset(n_arms, rng) at the start of a
trial, act(t) to pick an arm at 1-based round t, observe(t, arm, reward)
after the environment responds. Agents are deterministic given (seed, env).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .choicemodels import (
    Model,
    ProbitParams,
    QcareParams,
    SmParams,
    sample_choice,
)
from .domain import DomainError, Step
from .learner import LearnerConfig, drift, init_beliefs, observe as learner_observe


class ReplayIntegrityError(DomainError):
    """Environment reward diverged from the recorded reward during replay."""


class Agent(Protocol):
    def reset(self, n_arms: int, rng: np.random.Generator) -> None: ...

    def act(self, t: int) -> int: ...

    def observe(self, t: int, arm: int, reward: float) -> None: ...


@dataclass(frozen=True)
class UcbConfig:
    c: float = 2.0
    prior_sd: float = math.sqrt(10.0)  # used while an arm has fewer than two samples

    def __post_init__(self) -> None:
        if self.c <= 0 or self.prior_sd <= 0:
            raise DomainError("c and prior_sd must be positive")


@dataclass(frozen=True)
class TsConfig:
    mu0: float = 0.0
    lambda0: float = 1.0
    alpha0: float = 1.0
    beta0: float = 1.0

    def __post_init__(self) -> None:
        if min(self.lambda0, self.alpha0, self.beta0) <= 0:
            raise DomainError("NIG hyperparameters must be positive")


@dataclass(frozen=True)
class EpsConfig:
    epsilon: float = 0.1

    def __post_init__(self) -> None:
        if not (0.0 <= self.epsilon <= 1.0):
            raise DomainError("epsilon must lie in [0, 1]")


def ucb_f(t: int) -> float:
    """Exploration schedule f(t) = 1 + t * ln(t)^2."""
    return 1.0 + t * math.log(t) ** 2


class UcbAgent:
    """Mean plus variance-scaled bonus; warm phase pulls arms in index order."""

    def __init__(self, cfg: UcbConfig = UcbConfig()):
        self.cfg = cfg

    def reset(self, n_arms: int, rng: np.random.Generator) -> None:
        self.n_arms = n_arms
        self.counts = np.zeros(n_arms)
        self.sums = np.zeros(n_arms)
        self.sumsq = np.zeros(n_arms)

    def _sample_sd(self, k: int) -> float:
        n = self.counts[k]
        if n < 2:
            return self.cfg.prior_sd
        var = (self.sumsq[k] - self.sums[k] ** 2 / n) / (n - 1)
        return math.sqrt(max(var, 0.0))

    def act(self, t: int) -> int:
        if t <= self.n_arms:
            return t - 1
        bonus_scale = self.cfg.c * math.log(ucb_f(t))
        best, best_idx = -math.inf, 0
        for k in range(self.n_arms):
            mean = self.sums[k] / self.counts[k]
            idx = mean + self._sample_sd(k) * math.sqrt(bonus_scale / self.counts[k])
            if idx > best:  # strict: ties resolve to the lowest arm index
                best, best_idx = idx, k
        return best_idx

    def observe(self, t: int, arm: int, reward: float) -> None:
        self.counts[arm] += 1
        self.sums[arm] += reward
        self.sumsq[arm] += reward * reward


class TsAgent:
    """Thompson sampling with a Normal-Inverse-Gamma conjugate prior per arm."""

    def __init__(self, cfg: TsConfig = TsConfig()):
        self.cfg = cfg

    def reset(self, n_arms: int, rng: np.random.Generator) -> None:
        self.rng = rng
        self.mu = np.full(n_arms, self.cfg.mu0)
        self.lam = np.full(n_arms, self.cfg.lambda0)
        self.alpha = np.full(n_arms, self.cfg.alpha0)
        self.beta = np.full(n_arms, self.cfg.beta0)

    def act(self, t: int) -> int:
        sigma2 = 1.0 / self.rng.gamma(self.alpha, 1.0 / self.beta)
        draws = self.rng.normal(self.mu, np.sqrt(sigma2 / self.lam))
        return int(np.argmax(draws))

    def observe(self, t: int, arm: int, reward: float) -> None:
        # standard conjugate update with pre-update values; beta first,
        # lambda incremented last
        mu, lam = self.mu[arm], self.lam[arm]
        self.beta[arm] += lam * (reward - mu) ** 2 / (2.0 * (lam + 1.0))
        self.mu[arm] = (lam * mu + reward) / (lam + 1.0)
        self.lam[arm] = lam + 1.0
        self.alpha[arm] += 0.5


class EpsGreedyAgent:
    """Greedy on empirical means with probability 1 - epsilon after a warm
    phase; never consults the coin when epsilon is 0."""

    def __init__(self, cfg: EpsConfig = EpsConfig()):
        self.cfg = cfg

    def reset(self, n_arms: int, rng: np.random.Generator) -> None:
        self.n_arms = n_arms
        self.rng = rng
        self.counts = np.zeros(n_arms)
        self.sums = np.zeros(n_arms)

    def act(self, t: int) -> int:
        if t <= self.n_arms:
            return t - 1
        if self.cfg.epsilon > 0.0 and self.rng.random() < self.cfg.epsilon:
            return int(self.rng.integers(self.n_arms))
        means = self.sums / self.counts
        return int(np.argmax(means))  # argmax takes the lowest index on ties

    def observe(self, t: int, arm: int, reward: float) -> None:
        self.counts[arm] += 1
        self.sums[arm] += reward


class ReplayAgent:
    """Re-issues recorded choices and asserts the environment agrees on
    rewards, so drifted environments are caught at the first divergence."""

    def __init__(self, steps: Sequence[Step], atol: float = 1e-9):
        self.steps = list(steps)
        self.atol = atol

    def reset(self, n_arms: int, rng: np.random.Generator) -> None:
        pass

    def act(self, t: int) -> int:
        if not (1 <= t <= len(self.steps)):
            raise DomainError(f"round {t} outside the recorded range")
        return self.steps[t - 1].choice

    def observe(self, t: int, arm: int, reward: float) -> None:
        recorded = self.steps[t - 1].reward
        if abs(reward - recorded) > self.atol:
            raise ReplayIntegrityError(
                f"round {t}: environment reward {reward} != recorded {recorded}"
            )


class SimulatedChoiceAgent:
    """Plays a choice model forward: maintains its own Kalman beliefs (or
    empirical stats for the quantal-choice model) and samples each round."""

    def __init__(
        self,
        model: Model,
        params: SmParams | ProbitParams | QcareParams,
        learner_cfg: LearnerConfig,
    ):
        self.model = model
        self.params = params
        self.learner_cfg = learner_cfg

    def reset(self, n_arms: int, rng: np.random.Generator) -> None:
        self.n_arms = n_arms
        self.rng = rng
        self.beliefs = init_beliefs(self.learner_cfg, n_arms)
        self.prev_choice: int | None = None
        self.sums = np.zeros(n_arms)
        self.counts = np.zeros(n_arms)

    def act(self, t: int) -> int:
        if self.model is Model.QCARE:
            if t <= self.n_arms:  # one forced pull per arm seeds the means
                return t - 1
            mu_hat = self.sums / np.maximum(self.counts, 1)
            return sample_choice(
                self.model, self.params, self.rng, mu_hat=mu_hat, counts=self.counts
            )
        return sample_choice(
            self.model,
            self.params,
            self.rng,
            Q=self.beliefs.Q,
            S=self.beliefs.sd(),
            prev_choice=self.prev_choice,
        )

    def observe(self, t: int, arm: int, reward: float) -> None:
        self.beliefs = drift(
            learner_observe(self.beliefs, arm, reward, self.learner_cfg), self.learner_cfg
        )
        self.prev_choice = arm
        self.sums[arm] += reward
        self.counts[arm] += 1
