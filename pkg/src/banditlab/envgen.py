"""Deterministic, seeded generation of environments and rewards.

RNG substreams are derived with numpy SeedSequence keys so that every
(game, arm) and (seed, arm) stream is independent and individually
reproducible:

    stationary game means   spawn key (game, arm)
    restless mean noise     entropy tuple (seed, arm, 0)
    restless reward noise   entropy tuple (seed, arm, 1)
    stationary reward table (trial substream owned by the runner)

A restless realization is a pure function of (spec, seed); the group id is
a label attached afterwards, so distinct groups need distinct seeds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import DomainError, EnvSpec, RewardGroup, Variant

DEFAULT_GROUP_SEEDS = {1: 1, 2: 2, 3: 3}


def round_half_away(x: np.ndarray | float) -> np.ndarray | float:
    """Round to the nearest integer, halves away from zero."""
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _rng(seed: int, *spawn_key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=spawn_key))


@dataclass(frozen=True)
class StationaryGame:
    true_means: tuple[float, ...]
    seed: int
    game_index: int


def gen_stationary_games(spec: EnvSpec, n_games: int, seed: int) -> list[StationaryGame]:
    if spec.variant is not Variant.STATIONARY2:
        raise DomainError("gen_stationary_games requires a stationary spec")
    sd = np.sqrt(spec.mean_prior_variance)
    games = []
    for g in range(n_games):
        means = tuple(float(_rng(seed, g, a).normal(0.0, sd)) for a in range(spec.n_arms))
        games.append(StationaryGame(true_means=means, seed=seed, game_index=g))
    return games


def gen_reward_group(spec: EnvSpec, group_id: int, seed: int) -> RewardGroup:
    if spec.variant is not Variant.RESTLESS4:
        raise DomainError("gen_reward_group requires a restless spec")
    K, T = spec.n_arms, spec.horizon
    means = np.empty((K, T))
    rewards = np.empty((K, T))
    sigma_d = np.sqrt(spec.diffusion_variance)
    sigma_0 = np.sqrt(spec.reward_variance)
    for k in range(K):
        omega = np.random.default_rng(np.random.SeedSequence((seed, k, 0))).normal(
            0.0, sigma_d, size=T - 1
        )
        mu = np.empty(T)
        mu[0] = spec.initial_means[k]
        for t in range(1, T):
            mu[t] = spec.decay * mu[t - 1] + (1.0 - spec.decay) * spec.long_run_mean + omega[t - 1]
        means[k] = mu
        noise = np.random.default_rng(np.random.SeedSequence((seed, k, 1))).normal(
            0.0, sigma_0, size=T
        )
        rewards[k] = mu + noise
    if spec.integer_rewards:
        rewards = round_half_away(rewards)
    return RewardGroup(group_id=group_id, means=means, rewards=rewards, seed=seed)


def default_groups(spec: EnvSpec | None = None) -> dict[int, RewardGroup]:
    """The three standard pre-generated reward groups (seeds 1, 2, 3)."""
    from .domain import restless4_spec

    spec = spec or restless4_spec()
    return {gid: gen_reward_group(spec, gid, seed) for gid, seed in DEFAULT_GROUP_SEEDS.items()}


class StationaryEnv:
    """One two-armed game with fixed latent means and a pre-drawn reward table.

    Pre-drawing the whole (arms x rounds) table makes the environment a pure
    function of its seed stream, so agent decisions can never perturb the
    realized environment.
    """

    def __init__(self, spec: EnvSpec, true_means: tuple[float, ...], rng: np.random.Generator):
        if spec.variant is not Variant.STATIONARY2:
            raise DomainError("StationaryEnv requires a stationary spec")
        self.spec = spec
        self.true_means = true_means
        sd = np.sqrt(spec.reward_variance)
        table = rng.normal(0.0, sd, size=(spec.n_arms, spec.horizon))
        table += np.asarray(true_means)[:, None]
        if spec.integer_rewards:
            table = round_half_away(table)
        self.reward_table = table

    def sample_reward(self, arm: int, round_: int) -> float:
        if not (0 <= arm < self.spec.n_arms) or not (1 <= round_ <= self.spec.horizon):
            raise DomainError(f"arm {arm} / round {round_} out of range")
        return float(self.reward_table[arm, round_ - 1])


class RestlessEnv:
    """Wraps a RewardGroup: rewards are lookups, never fresh draws."""

    def __init__(self, spec: EnvSpec, group: RewardGroup):
        if spec.variant is not Variant.RESTLESS4:
            raise DomainError("RestlessEnv requires a restless spec")
        if group.n_arms != spec.n_arms or group.horizon != spec.horizon:
            raise DomainError("group shape does not match spec")
        self.spec = spec
        self.group = group

    def sample_reward(self, arm: int, round_: int) -> float:
        if not (0 <= arm < self.spec.n_arms) or not (1 <= round_ <= self.spec.horizon):
            raise DomainError(f"arm {arm} / round {round_} out of range")
        return float(self.group.rewards[arm, round_ - 1])


def sample_reward(env: StationaryEnv | RestlessEnv, arm: int, round_: int) -> float:
    return env.sample_reward(arm, round_)
