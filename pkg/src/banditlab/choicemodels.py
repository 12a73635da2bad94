"""Choice models over Kalman beliefs: three nested softmax variants, a
probit on value/uncertainty features, and a quantal-choice model whose noise
shrinks with pull counts.

Functions here are the readable per-trajectory reference implementations;
estimation flattens datasets and calls the vectorized kernels instead, and
the test suite pins both to each other.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import log_ndtr, ndtr

from .domain import DomainError, Step, Trajectory
from .learner import LearnerConfig, trace_arrays


class Model(str, enum.Enum):
    SM1 = "sm1"
    SM2 = "sm2"
    SM3 = "sm3"
    PROBIT = "probit"
    QCARE = "qcare"


SM_MODELS = (Model.SM1, Model.SM2, Model.SM3)


@dataclass(frozen=True)
class SmParams:
    """Softmax parameters: inverse temperature, uncertainty bonus,
    perseveration bonus. SM1 forces phi = rho = 0; SM2 forces rho = 0."""

    beta: float
    phi: float = 0.0
    rho: float = 0.0
    order: Model = Model.SM3

    def __post_init__(self) -> None:
        if self.order not in SM_MODELS:
            raise DomainError(f"not a softmax model: {self.order}")
        if not all(math.isfinite(v) for v in (self.beta, self.phi, self.rho)):
            raise DomainError("softmax parameters must be finite")
        if self.order is Model.SM1 and (self.phi != 0.0 or self.rho != 0.0):
            raise DomainError("SM1 forces phi = rho = 0")
        if self.order is Model.SM2 and self.rho != 0.0:
            raise DomainError("SM2 forces rho = 0")


@dataclass(frozen=True)
class ProbitParams:
    w1: float  # value difference
    w2: float  # relative uncertainty
    w3: float  # value difference normalized by total uncertainty

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.w1, self.w2, self.w3)):
            raise DomainError("probit weights must be finite")


@dataclass(frozen=True)
class ProbitFeatures:
    V: float  # Q difference, first minus second arm
    RU: float  # SD difference
    TU: float  # sqrt of summed variances

    @staticmethod
    def from_beliefs(Q: np.ndarray, S_sd: np.ndarray) -> "ProbitFeatures":
        if len(Q) != 2:
            raise DomainError("probit features are defined for 2 arms")
        return ProbitFeatures(
            V=float(Q[0] - Q[1]),
            RU=float(S_sd[0] - S_sd[1]),
            TU=float(np.sqrt(S_sd[0] ** 2 + S_sd[1] ** 2)),
        )


@dataclass(frozen=True)
class QcareParams:
    alpha: float  # exploration reduction rate; 0.5 is the regret-optimal reference

    def __post_init__(self) -> None:
        if not math.isfinite(self.alpha):
            raise DomainError("alpha must be finite")


def sm_probs(
    p: SmParams,
    Q: np.ndarray,
    S: np.ndarray,
    prev_choice: int | None,
) -> np.ndarray:
    """Choice probabilities; S is the posterior SD per arm."""
    Q = np.asarray(Q, dtype=np.float64)
    S = np.asarray(S, dtype=np.float64)
    if Q.shape != S.shape or Q.ndim != 1 or len(Q) < 2:
        raise DomainError("Q and S must be equal-length vectors of >= 2 arms")
    if not (np.isfinite(Q).all() and np.isfinite(S).all()):
        raise DomainError("non-finite beliefs")
    index = Q + p.phi * S
    if prev_choice is not None:
        index = index.copy()
        index[prev_choice] += p.rho
    logits = p.beta * index
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()


def probit_prob_arm1(p: ProbitParams, f: ProbitFeatures) -> float:
    """Probability that the FIRST arm is chosen."""
    if f.TU <= 0.0:
        raise DomainError("degenerate features: TU must be positive")
    x = p.w1 * f.V + p.w2 * f.RU + p.w3 * f.V / f.TU
    return float(ndtr(x))


def qcare_choice_prob(p: QcareParams, mu_hat: Sequence[float], counts: Sequence[int]) -> float:
    """Probability that the FIRST arm wins the noisy score comparison.

    Exact law of argmax_i of mu_hat_i + (counts_i + 1)^(-alpha) * eps_i with
    independent standard normal eps.
    """
    if len(mu_hat) != 2 or len(counts) != 2:
        raise DomainError("quantal-choice probability is defined for 2 arms")
    if min(counts) < 0:
        raise DomainError("counts must be >= 0")
    noise_var = (counts[0] + 1.0) ** (-2.0 * p.alpha) + (counts[1] + 1.0) ** (-2.0 * p.alpha)
    x = (mu_hat[0] - mu_hat[1]) / math.sqrt(noise_var)
    return float(ndtr(x))


def empirical_stats_trace(steps: Sequence[Step], n_arms: int) -> tuple[np.ndarray, np.ndarray]:
    """Pre-choice empirical reward means and pull counts, [rounds, arms].

    Arms not yet pulled carry mean 0; callers must mask such rounds out.
    """
    T = len(steps)
    mu = np.zeros((T, n_arms))
    counts = np.zeros((T, n_arms))
    sums = np.zeros(n_arms)
    n = np.zeros(n_arms)
    for t in range(T):
        with np.errstate(invalid="ignore"):
            mu[t] = np.where(n > 0, sums / np.maximum(n, 1), 0.0)
        counts[t] = n
        a = steps[t].choice
        sums[a] += steps[t].reward
        n[a] += 1
    return mu, counts


def qcare_included_rounds(counts: np.ndarray) -> np.ndarray:
    """Rounds entering the quantal-choice likelihood: both arms observed and
    past the two warm-start rounds."""
    T = counts.shape[0]
    seen_both = (counts > 0).all(axis=1)
    past_warm = np.arange(1, T + 1) > 2
    return seen_both & past_warm


def prev_choice_at(steps: Sequence[Step], t: int) -> int | None:
    """Previous-round choice for round t (1-based); none at round 1."""
    return None if t == 1 else steps[t - 2].choice


def loglik(
    model: Model,
    params: SmParams | ProbitParams | QcareParams,
    trajectory: Trajectory,
    learner_cfg: LearnerConfig,
) -> float:
    """Log-likelihood of the trajectory's choices under the model, in nats."""
    steps = trajectory.steps
    if not steps:
        return 0.0
    n_arms = _n_arms_of(trajectory)
    if model in SM_MODELS:
        assert isinstance(params, SmParams)
        Q, S_sq = trace_arrays(steps, learner_cfg, n_arms)
        S = np.sqrt(S_sq)
        total = 0.0
        for t in range(1, len(steps) + 1):
            probs = sm_probs(params, Q[t - 1], S[t - 1], prev_choice_at(steps, t))
            total += math.log(probs[steps[t - 1].choice])
        return total
    if model is Model.PROBIT:
        assert isinstance(params, ProbitParams)
        if n_arms != 2:
            raise DomainError("probit likelihood requires 2-armed trajectories")
        Q, S_sq = trace_arrays(steps, learner_cfg, n_arms)
        S = np.sqrt(S_sq)
        total = 0.0
        for t in range(1, len(steps) + 1):
            f = ProbitFeatures.from_beliefs(Q[t - 1], S[t - 1])
            if f.TU <= 0.0:
                raise DomainError("degenerate features: TU must be positive")
            x = params.w1 * f.V + params.w2 * f.RU + params.w3 * f.V / f.TU
            chose_first = steps[t - 1].choice == 0
            total += float(log_ndtr(x if chose_first else -x))
        return total
    if model is Model.QCARE:
        assert isinstance(params, QcareParams)
        if n_arms != 2:
            raise DomainError("quantal-choice likelihood requires 2-armed trajectories")
        mu, counts = empirical_stats_trace(steps, n_arms)
        include = qcare_included_rounds(counts)
        total = 0.0
        for t in np.flatnonzero(include):
            noise = (counts[t, 0] + 1.0) ** (-2 * params.alpha) + (
                counts[t, 1] + 1.0
            ) ** (-2 * params.alpha)
            x = (mu[t, 0] - mu[t, 1]) / math.sqrt(noise)
            chose_first = steps[t].choice == 0
            total += float(log_ndtr(x if chose_first else -x))
        return total
    raise DomainError(f"unknown model: {model}")


def _n_arms_of(trajectory: Trajectory) -> int:
    if trajectory.true_means is not None:
        return len(trajectory.true_means)
    return max(s.choice for s in trajectory.steps) + 1 if trajectory.steps else 2


def sample_choice(
    model: Model,
    params: SmParams | ProbitParams | QcareParams,
    rng: np.random.Generator,
    *,
    Q: np.ndarray | None = None,
    S: np.ndarray | None = None,
    prev_choice: int | None = None,
    mu_hat: Sequence[float] | None = None,
    counts: Sequence[int] | None = None,
) -> int:
    """Draw an arm from the model's choice distribution."""
    if model in SM_MODELS:
        assert isinstance(params, SmParams)
        probs = sm_probs(params, Q, S, prev_choice)
        return int(rng.choice(len(probs), p=probs))
    if model is Model.PROBIT:
        assert isinstance(params, ProbitParams)
        f = ProbitFeatures.from_beliefs(np.asarray(Q), np.asarray(S))
        p1 = probit_prob_arm1(params, f)
        return 0 if rng.random() < p1 else 1
    if model is Model.QCARE:
        assert isinstance(params, QcareParams)
        p1 = qcare_choice_prob(params, mu_hat, counts)
        return 0 if rng.random() < p1 else 1
    raise DomainError(f"unknown model: {model}")
