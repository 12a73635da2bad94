"""Leave-one-subject-out predictive comparison from posterior draws.

Importance ratios for dropping subject s are 1/L_s(theta_m) over kept
draws m. The largest ratios are stabilized by fitting a generalized
Pareto tail (method of moments) and replacing them with tail quantiles,
then each subject's expected log predictive density is a self-normalized
importance average. Subjects are the pointwise unit throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..domain import DomainError
from .hier import HierPosterior

MIN_DRAWS = 100
KHAT_WARN = 0.7


def _fit_gpd_moments(exceed: np.ndarray) -> tuple[float, float]:
    """Shape and scale from the first two moments of tail exceedances."""
    m = float(exceed.mean())
    v = float(exceed.var(ddof=1)) if exceed.size > 1 else 0.0
    if v <= 1e-300 or m <= 0.0:
        # Flat tail: vanishing shape, spread set by the mean alone.
        return -0.5, max(m, 1e-300)
    ratio = m * m / v
    xi = 0.5 * (1.0 - ratio)
    scale = 0.5 * m * (1.0 + ratio)
    return xi, scale


def _gpd_quantile(p: np.ndarray, xi: float, scale: float) -> np.ndarray:
    if abs(xi) < 1e-12:
        return -scale * np.log1p(-p)
    return scale * ((1.0 - p) ** (-xi) - 1.0) / xi


def _smooth_one(lw: np.ndarray) -> tuple[np.ndarray, float]:
    """Pareto-smooth one subject's log ratios; returns (smoothed, k-hat)."""
    S = lw.size
    if np.ptp(lw) < 1e-12:
        return np.zeros_like(lw), 0.0
    shift = lw.max()
    w = np.exp(lw - shift)
    M = int(np.ceil(min(0.2 * S, 3.0 * np.sqrt(S))))
    M = min(M, S - 1)
    if M < 1:
        return lw - shift, 0.0
    order = np.argsort(w)
    tail_idx = order[S - M :]
    cutoff = w[order[S - M - 1]]
    exceed = w[tail_idx] - cutoff
    xi, scale = _fit_gpd_moments(exceed)
    probs = (np.arange(1, M + 1) - 0.5) / M
    repl = cutoff + _gpd_quantile(probs, xi, scale)
    repl = np.minimum(repl, w[tail_idx].max())
    smoothed = w.copy()
    # tail_idx is already in increasing-weight order, and the replacement
    # quantiles are non-decreasing, so ranks line up position for position.
    smoothed[tail_idx] = repl
    return np.log(np.maximum(smoothed, 1e-300)) + shift, xi


@dataclass
class LooReport:
    model: str
    elpd: float
    elpd_per_choice: float
    se: float
    pointwise: np.ndarray  # [N]
    khat: np.ndarray  # [N]
    n_draws: int
    n_choices: int
    subject_ids: tuple[str, ...]
    flagged: list[str]

    @property
    def n_subjects(self) -> int:
        return self.pointwise.size

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "elpd": self.elpd,
            "elpd_per_choice": self.elpd_per_choice,
            "se": self.se,
            "n_draws": self.n_draws,
            "n_subjects": self.n_subjects,
            "n_choices": self.n_choices,
            "khat_max": float(self.khat.max()),
            "flagged_subjects": list(self.flagged),
            "pointwise": [float(x) for x in self.pointwise],
            "khat": [float(k) for k in self.khat],
        }


def psis_loo_from_draws(
    loglik: np.ndarray,
    n_rows: np.ndarray,
    subject_ids: tuple[str, ...] | None = None,
    model: str = "custom",
) -> LooReport:
    """Compute the report from an [draws, subjects] log-likelihood matrix."""
    L = np.asarray(loglik, dtype=np.float64)
    if L.ndim != 2:
        raise DomainError("expected a [draws, subjects] log-likelihood matrix")
    S, N = L.shape
    if S < MIN_DRAWS:
        raise DomainError(
            f"{S} posterior draws is too few for tail smoothing; need {MIN_DRAWS}"
        )
    if not np.all(np.isfinite(L)):
        raise DomainError("log-likelihood draws contain non-finite values")
    ids = tuple(subject_ids) if subject_ids else tuple(f"s{i:04d}" for i in range(N))
    rows = np.asarray(n_rows, dtype=np.int64)

    pointwise = np.empty(N)
    khat = np.empty(N)
    for s in range(N):
        lw, k = _smooth_one(-L[:, s])
        pointwise[s] = logsumexp(lw + L[:, s]) - logsumexp(lw)
        khat[s] = k

    elpd = float(pointwise.sum())
    n_choices = int(rows.sum())
    se = float(np.sqrt(N * pointwise.var(ddof=1))) if N > 1 else 0.0
    flagged = [ids[s] for s in range(N) if khat[s] > KHAT_WARN]
    return LooReport(
        model=model,
        elpd=elpd,
        elpd_per_choice=elpd / n_choices if n_choices else float("nan"),
        se=se,
        pointwise=pointwise,
        khat=khat,
        n_draws=S,
        n_choices=n_choices,
        subject_ids=ids,
        flagged=flagged,
    )


def psis_loo(posterior: HierPosterior) -> LooReport:
    """Leave-one-subject-out estimate from a fitted posterior."""
    return psis_loo_from_draws(
        posterior.loglik_draws(),
        posterior.n_rows,
        posterior.subject_ids,
        model=posterior.model,
    )


def compare(reports: list[LooReport]) -> list[dict]:
    """Rank fits by predictive density, best first, with pairwise SEs."""
    ranked = sorted(reports, key=lambda r: r.elpd, reverse=True)
    best = ranked[0]
    out = []
    for r in ranked:
        diff = r.elpd - best.elpd
        if r is best:
            dse = 0.0
        else:
            pw = r.pointwise - best.pointwise
            dse = float(np.sqrt(pw.size * pw.var(ddof=1))) if pw.size > 1 else 0.0
        out.append(
            {
                "model": r.model,
                "elpd": r.elpd,
                "elpd_per_choice": r.elpd_per_choice,
                "elpd_diff": diff,
                "diff_se": dse,
                "khat_max": float(r.khat.max()),
            }
        )
    return out
