"""banditlab: exploration-exploitation experiments on two- and four-armed
bandits, with algorithmic, simulated, replayed, and language-model subjects,
plus hierarchical Bayesian estimation of how each subject traded off value,
uncertainty, and habit."""

__version__ = "0.1.0"

from .domain import (
    Dataset,
    DomainError,
    EnvSpec,
    Step,
    Trajectory,
    Variant,
    restless4_spec,
    stationary2_spec,
)
from .envgen import default_groups, gen_reward_group, gen_stationary_games
from .kernels import IMPL as kernel_impl
from .learner import LearnerConfig, default_learner
from .choicemodels import Model, ProbitParams, QcareParams, SmParams
from .runner import RunPlan, run, sweep_eps, sweep_ucb_c

__all__ = [
    "__version__",
    "Dataset",
    "DomainError",
    "EnvSpec",
    "Step",
    "Trajectory",
    "Variant",
    "restless4_spec",
    "stationary2_spec",
    "default_groups",
    "gen_reward_group",
    "gen_stationary_games",
    "kernel_impl",
    "LearnerConfig",
    "default_learner",
    "Model",
    "ProbitParams",
    "QcareParams",
    "SmParams",
    "RunPlan",
    "run",
    "sweep_eps",
    "sweep_ucb_c",
]
