"""Estimation: hierarchical Bayesian fits, MAP utilities, quantal-choice
alpha estimation, importance-sampling cross-validation, recovery harness."""

from .contexts import LikContext, build_context
from .hier import (
    HierPosterior,
    HierPrior,
    ParamPrior,
    RunawayError,
    default_prior,
    fit_hier,
    map_fit,
)
from .loo import LooReport, psis_loo
from .qcare import QcareFit, fit_qcare
from .recovery import RECOVERY_PRESETS, run_qcare_recovery, run_recovery

__all__ = [
    "LikContext",
    "build_context",
    "HierPosterior",
    "HierPrior",
    "ParamPrior",
    "RunawayError",
    "default_prior",
    "fit_hier",
    "map_fit",
    "LooReport",
    "psis_loo",
    "QcareFit",
    "fit_qcare",
    "RECOVERY_PRESETS",
    "run_qcare_recovery",
    "run_recovery",
]
