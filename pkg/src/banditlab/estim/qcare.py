"""Per-subject maximum-likelihood estimation of the count-based choice
model's exploration exponent on [0, 3]: coarse grid, then golden-section
refinement around the best cell, batched across subjects."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..choicemodels import Model
from ..domain import Dataset
from .contexts import build_context
from .hier import _golden_vec_simple

ALPHA_LO = 0.0
ALPHA_HI = 3.0
BOUNDARY_MARGIN = 0.02


@dataclass
class QcareFit:
    subject_ids: tuple[str, ...]
    alpha: np.ndarray  # [N]
    loglik: np.ndarray  # [N] at the estimate
    n_included: np.ndarray  # [N] rounds entering each likelihood
    degenerate: list[str]  # excluded from the group mean
    boundary: list[str]  # estimate pinned at an edge; kept in the mean

    def group_mean(self) -> float:
        keep = [i for i, s in enumerate(self.subject_ids) if s not in self.degenerate]
        if not keep:
            return float("nan")
        return float(self.alpha[keep].mean())

    def to_dict(self) -> dict:
        return {
            "group_mean_alpha": self.group_mean(),
            "n_subjects": len(self.subject_ids),
            "n_degenerate": len(self.degenerate),
            "degenerate_subjects": list(self.degenerate),
            "boundary_subjects": list(self.boundary),
            "alpha": {s: float(a) for s, a in zip(self.subject_ids, self.alpha)},
            "n_included": {
                s: int(n) for s, n in zip(self.subject_ids, self.n_included)
            },
        }


def fit_qcare(dataset: Dataset, *, grid_size: int = 21, refine_iters: int = 40) -> QcareFit:
    ctx = build_context(Model.QCARE, dataset)
    n = ctx.n_subjects
    include = ctx.arrays["include"]
    chose_first = ctx.arrays["chose_first"]
    offsets = ctx.offsets

    degenerate: list[str] = []
    for i, sid in enumerate(ctx.subject_ids):
        rows = slice(offsets[i], offsets[i + 1])
        picks = chose_first[rows][include[rows] == 1]
        # One-sided choosers give a likelihood monotone in the exponent.
        if picks.size == 0 or picks.min() == picks.max():
            degenerate.append(sid)

    grid = np.linspace(ALPHA_LO, ALPHA_HI, grid_size)
    ll_grid = np.stack([ctx.loglik(np.full((n, 1), g)) for g in grid])  # [G, N]
    best = ll_grid.argmax(axis=0)
    lo = grid[np.maximum(best - 1, 0)]
    hi = grid[np.minimum(best + 1, grid_size - 1)]

    def f(vals: np.ndarray) -> np.ndarray:
        return ctx.loglik(vals[:, None])

    alpha, ll = _golden_vec_simple(f, lo, hi, iters=refine_iters)
    alpha = np.clip(alpha, ALPHA_LO, ALPHA_HI)

    boundary = [
        sid
        for i, sid in enumerate(ctx.subject_ids)
        if alpha[i] <= ALPHA_LO + BOUNDARY_MARGIN or alpha[i] >= ALPHA_HI - BOUNDARY_MARGIN
    ]
    n_included = np.array(
        [int(include[offsets[i] : offsets[i + 1]].sum()) for i in range(n)],
        dtype=np.int64,
    )
    return QcareFit(
        subject_ids=ctx.subject_ids,
        alpha=alpha,
        loglik=ll,
        n_included=n_included,
        degenerate=degenerate,
        boundary=boundary,
    )
