"""Numpy reference implementations of the per-subject likelihood kernels.

The compiled extension (_ckernels) implements exactly the same contracts;
kernels.py picks whichever is importable. Rows of the flattened arrays are
(subject, game, round) in order; subject s owns rows offsets[s]:offsets[s+1].
"""

from __future__ import annotations

import numpy as np
from scipy.special import log_ndtr as _scipy_log_ndtr

IMPL = "python"


def log_ndtr_vec(x: np.ndarray) -> np.ndarray:
    """log of the standard normal CDF, elementwise."""
    return _scipy_log_ndtr(np.asarray(x, dtype=np.float64))


def _segment_sums(values: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    starts = offsets[:-1]
    out = np.add.reduceat(values, starts)
    # reduceat misreads empty segments; subjects always own >= 1 row.
    return out


def sm_loglik(
    beta: np.ndarray,
    phi: np.ndarray,
    rho: np.ndarray,
    Q: np.ndarray,
    S: np.ndarray,
    prev: np.ndarray,
    choice: np.ndarray,
    offsets: np.ndarray,
) -> np.ndarray:
    """Softmax choice log-likelihood per subject.

    index_k = beta * (Q_k + phi * S_k + rho * prev_k), probabilities by
    max-subtracted softmax over arms.
    """
    counts = np.diff(offsets)
    b = np.repeat(beta, counts)[:, None]
    p = np.repeat(phi, counts)[:, None]
    r = np.repeat(rho, counts)[:, None]
    logits = b * (Q + p * S + r * prev)
    m = logits.max(axis=1)
    lse = m + np.log(np.exp(logits - m[:, None]).sum(axis=1))
    rows = np.arange(Q.shape[0])
    per_row = logits[rows, choice] - lse
    return _segment_sums(per_row, offsets)


def probit_loglik(
    w1: np.ndarray,
    w2: np.ndarray,
    w3: np.ndarray,
    V: np.ndarray,
    RU: np.ndarray,
    VTU: np.ndarray,
    chose_first: np.ndarray,
    offsets: np.ndarray,
) -> np.ndarray:
    """Probit choice log-likelihood per subject (two-armed only).

    P(first arm) = Phi(w1*V + w2*RU + w3*V/TU); VTU is the precomputed V/TU.
    """
    counts = np.diff(offsets)
    x = (
        np.repeat(w1, counts) * V
        + np.repeat(w2, counts) * RU
        + np.repeat(w3, counts) * VTU
    )
    signed = np.where(chose_first.astype(bool), x, -x)
    return _segment_sums(log_ndtr_vec(signed), offsets)


def qcare_loglik(
    alpha: np.ndarray,
    dmu: np.ndarray,
    n_first: np.ndarray,
    n_second: np.ndarray,
    chose_first: np.ndarray,
    included: np.ndarray,
    offsets: np.ndarray,
) -> np.ndarray:
    """Quantal-choice log-likelihood per subject (two-armed only).

    P(first arm) = Phi(dmu / sqrt((n1+1)^(-2a) + (n2+1)^(-2a))); rows with
    included == 0 contribute zero (warm-start rounds).
    """
    counts = np.diff(offsets)
    a = np.repeat(alpha, counts)
    noise = (n_first + 1.0) ** (-2.0 * a) + (n_second + 1.0) ** (-2.0 * a)
    x = dmu / np.sqrt(noise)
    signed = np.where(chose_first.astype(bool), x, -x)
    per_row = np.where(included.astype(bool), log_ndtr_vec(signed), 0.0)
    return _segment_sums(per_row, offsets)
