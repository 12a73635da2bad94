"""Experiment orchestration: trial loops, seeding, sweeps, truncation.

Each trial owns two RNG substreams derived from the master seed by spawn
key: (trial, 0) for the environment and (trial, 1) for the agent. Deleting a
trial therefore never perturbs any other trial, and sweeps sharing a master
seed share their environments exactly.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import agents as agents_mod
from .agents import Agent, EpsConfig, EpsGreedyAgent, TsAgent, TsConfig, UcbAgent, UcbConfig
from .choicemodels import Model, ProbitParams, QcareParams, SmParams
from .domain import Dataset, DomainError, EnvSpec, Step, Trajectory, Variant, stationary2_spec
from .envgen import RestlessEnv, StationaryEnv, default_groups
from .learner import LearnerConfig, default_learner


@dataclass(frozen=True)
class RunPlan:
    env_spec: EnvSpec
    agent_kind: str
    agent_params: Mapping[str, float] = field(default_factory=dict)
    n_trials: int = 300
    trials_per_subject: int | None = None  # default: 20 stationary, 1 restless
    master_seed: int = 0
    group_ids: tuple[int, ...] = (1, 2, 3)
    agent_label: str | None = None

    @property
    def label(self) -> str:
        return self.agent_label or self.agent_kind

    def subject_size(self) -> int:
        if self.trials_per_subject is not None:
            return self.trials_per_subject
        return 20 if self.env_spec.variant is Variant.STATIONARY2 else 1


def make_agent(kind: str, params: Mapping[str, float], spec: EnvSpec) -> Agent:
    stationary = spec.variant is Variant.STATIONARY2
    p = dict(params)
    if kind == "ucb":
        prior_sd = p.pop("prior_sd", math.sqrt(10.0) if stationary else 2.0)
        return UcbAgent(UcbConfig(c=p.pop("c", 2.0), prior_sd=prior_sd))
    if kind == "ts":
        mu0 = p.pop("mu0", 0.0 if stationary else 50.0)
        return TsAgent(
            TsConfig(
                mu0=mu0,
                lambda0=p.pop("lambda0", 1.0),
                alpha0=p.pop("alpha0", 1.0),
                beta0=p.pop("beta0", 1.0),
            )
        )
    if kind == "eps":
        return EpsGreedyAgent(EpsConfig(epsilon=p.pop("epsilon", 0.1)))
    if kind in ("sm1", "sm2", "sm3"):
        order = Model(kind)
        sm = SmParams(
            beta=p.pop("beta", 1.0),
            phi=p.pop("phi", 0.0) if kind != "sm1" else 0.0,
            rho=p.pop("rho", 0.0) if kind == "sm3" else 0.0,
            order=order,
        )
        return agents_mod.SimulatedChoiceAgent(order, sm, _learner_from(p, spec))
    if kind == "probit":
        pr = ProbitParams(w1=p.pop("w1", 1.0), w2=p.pop("w2", 0.0), w3=p.pop("w3", 0.0))
        return agents_mod.SimulatedChoiceAgent(Model.PROBIT, pr, _learner_from(p, spec))
    if kind == "qcare":
        qc = QcareParams(alpha=p.pop("alpha", 0.5))
        return agents_mod.SimulatedChoiceAgent(Model.QCARE, qc, _learner_from(p, spec))
    raise DomainError(f"unknown agent kind: {kind}")


def _learner_from(params: Mapping[str, float], spec: EnvSpec) -> LearnerConfig:
    cfg = default_learner(spec)
    overrides = {k: v for k, v in params.items() if k in cfg.to_dict()}
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _trial_rngs(master_seed: int, trial: int) -> tuple[np.random.Generator, np.random.Generator]:
    env = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(trial, 0)))
    agent = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(trial, 1)))
    return env, agent


def run_with_factory(
    env_spec: EnvSpec,
    agent_factory: Callable[[int], Agent],
    n_trials: int,
    trials_per_subject: int,
    master_seed: int,
    agent_label: str,
    groups=None,
    group_ids: tuple[int, ...] = (1, 2, 3),
) -> Dataset:
    """Run one agent instance per trial; factory receives the trial index."""
    trajectories: list[Trajectory] = []
    incomplete: list[int] = []
    if env_spec.variant is Variant.RESTLESS4 and groups is None:
        groups = default_groups(env_spec)
    for i in range(n_trials):
        env_rng, agent_rng = _trial_rngs(master_seed, i)
        if env_spec.variant is Variant.STATIONARY2:
            means = tuple(
                float(x)
                for x in env_rng.normal(0.0, math.sqrt(env_spec.mean_prior_variance), env_spec.n_arms)
            )
            env = StationaryEnv(env_spec, means, env_rng)
            group_id = None
        else:
            group_id = group_ids[i % len(group_ids)]
            env = RestlessEnv(env_spec, groups[group_id])
            means = None
        agent = agent_factory(i)
        agent.reset(env_spec.n_arms, agent_rng)
        steps: list[Step] = []
        try:
            for t in range(1, env_spec.horizon + 1):
                arm = agent.act(t)
                reward = env.sample_reward(arm, t)
                agent.observe(t, arm, reward)
                steps.append(Step(round=t, choice=arm, reward=reward))
        except Exception:  # noqa: BLE001 - a failed trial must not sink the run
            incomplete.append(i)
            continue
        subject = f"s{i // trials_per_subject:04d}"
        trajectories.append(
            Trajectory(
                subject_id=subject,
                trial_index=i,
                steps=tuple(steps),
                true_means=means,
                group_id=group_id,
            )
        )
    meta = {
        "master_seed": master_seed,
        "completion_rate": 1.0 if n_trials == 0 else len(trajectories) / n_trials,
    }
    if incomplete:
        meta["incomplete_trials"] = incomplete
    return Dataset(env_spec=env_spec, agent_label=agent_label, trajectories=trajectories, meta=meta)


def run(plan: RunPlan, groups=None) -> Dataset:
    def factory(_: int) -> Agent:
        return make_agent(plan.agent_kind, plan.agent_params, plan.env_spec)

    return run_with_factory(
        plan.env_spec,
        factory,
        plan.n_trials,
        plan.subject_size(),
        plan.master_seed,
        plan.label,
        groups=groups,
        group_ids=plan.group_ids,
    )


def sweep_env(horizon: int = 300) -> EnvSpec:
    """The sweep setting: the usual 20-game stationary session with each
    game's decision rounds expanded to the long horizon."""
    return stationary2_spec(horizon=horizon, games_per_session=20)


def sweep_eps(
    eps_grid: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9),
    n_trials: int = 200,
    master_seed: int = 0,
    horizon: int = 300,
) -> dict[float, Dataset]:
    spec = sweep_env(horizon)
    out = {}
    for eps in eps_grid:
        plan = RunPlan(
            env_spec=spec,
            agent_kind="eps",
            agent_params={"epsilon": eps},
            n_trials=n_trials,
            trials_per_subject=spec.games_per_session,
            master_seed=master_seed,
            agent_label=f"eps={eps:g}",
        )
        out[eps] = run(plan)
    return out


def sweep_ucb_c(
    c_grid: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0),
    n_trials: int = 200,
    master_seed: int = 0,
    horizon: int = 300,
) -> dict[float, Dataset]:
    spec = sweep_env(horizon)
    out = {}
    for c in c_grid:
        plan = RunPlan(
            env_spec=spec,
            agent_kind="ucb",
            agent_params={"c": c},
            n_trials=n_trials,
            trials_per_subject=spec.games_per_session,
            master_seed=master_seed,
            agent_label=f"ucb_c={c:g}",
        )
        out[c] = run(plan)
    return out


def eps_grid_search(
    eps_grid: tuple[float, ...],
    n_trials: int = 300,
    master_seed: int = 0,
) -> tuple[float, dict[float, float]]:
    """Mean final Bayesian regret per epsilon on the short stationary task;
    returns (best epsilon, regret by epsilon)."""
    from .metrics import bayes_regret

    spec = stationary2_spec()
    scores = {}
    for eps in eps_grid:
        plan = RunPlan(
            env_spec=spec,
            agent_kind="eps",
            agent_params={"epsilon": eps},
            n_trials=n_trials,
            master_seed=master_seed,
        )
        curve = bayes_regret(run(plan))
        scores[eps] = float(curve.mean[-1])
    best = min(scores, key=scores.get)
    return best, scores


def truncate(dataset: Dataset, horizon: int) -> Dataset:
    """Cut every trajectory to its first `horizon` rounds."""
    if horizon < 1:
        raise DomainError("truncation horizon must be >= 1")
    if horizon > dataset.env_spec.horizon:
        raise DomainError("truncation horizon exceeds the dataset horizon")
    if horizon == dataset.env_spec.horizon:
        return dataset
    spec = dataclasses.replace(dataset.env_spec, horizon=horizon)
    cut = [
        dataclasses.replace(t, steps=tuple(t.steps[:horizon])) for t in dataset.trajectories
    ]
    meta = dict(dataset.meta)
    meta["truncated_from"] = dataset.env_spec.horizon
    return Dataset(
        env_spec=spec,
        agent_label=dataset.agent_label,
        trajectories=cut,
        subjects={k: list(v) for k, v in dataset.subjects.items()},
        meta=meta,
    )
