"""Shared fixtures and small builders for hand-crafted datasets."""

import numpy as np
import pytest

from banditlab.domain import (
    Dataset,
    Step,
    Trajectory,
    restless4_spec,
    stationary2_spec,
)


@pytest.fixture(scope="session")
def stat_spec():
    return stationary2_spec()


@pytest.fixture(scope="session")
def rest_spec():
    return restless4_spec()


def make_traj(
    choices,
    rewards,
    *,
    subject_id="s0000",
    trial_index=0,
    true_means=None,
    group_id=None,
):
    steps = tuple(
        Step(t + 1, int(c), float(r)) for t, (c, r) in enumerate(zip(choices, rewards))
    )
    return Trajectory(
        subject_id=subject_id,
        trial_index=trial_index,
        steps=steps,
        true_means=true_means,
        group_id=group_id,
    )


def make_stationary_dataset(spec, trials, label="test"):
    """trials: list of (choices, rewards, true_means[, subject_id]) tuples."""
    trajs = []
    for i, row in enumerate(trials):
        choices, rewards, means = row[:3]
        sid = row[3] if len(row) > 3 else "s0000"
        trajs.append(
            make_traj(
                choices,
                rewards,
                subject_id=sid,
                trial_index=i,
                true_means=tuple(float(m) for m in means),
            )
        )
    return Dataset(env_spec=spec, agent_label=label, trajectories=trajs)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
