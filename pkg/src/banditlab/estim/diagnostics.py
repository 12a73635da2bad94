"""Chain diagnostics: split R-hat and autocorrelation-based effective
sample size, computed on raw (untransformed) draws."""

from __future__ import annotations

import numpy as np


def _split(chains: np.ndarray) -> np.ndarray:
    """Halve each chain so slow trends show up as between-sequence variance."""
    c = np.asarray(chains, dtype=np.float64)
    if c.ndim == 1:
        c = c[None, :]
    n = c.shape[1] // 2
    if n < 2:
        raise ValueError("need at least 4 draws per chain for split diagnostics")
    return np.concatenate([c[:, :n], c[:, n : 2 * n]], axis=0)


def split_rhat(chains: np.ndarray) -> float:
    """Potential scale reduction over split chains; ~1 at convergence."""
    seq = _split(chains)
    m, n = seq.shape
    means = seq.mean(axis=1)
    within = seq.var(axis=1, ddof=1).mean()
    between = n * means.var(ddof=1)
    if within == 0.0:
        # All sequences constant: identical constants are trivially converged,
        # differing constants are maximally unconverged.
        return 1.0 if between == 0.0 else np.inf
    var_plus = (n - 1) / n * within + between / n
    return float(np.sqrt(var_plus / within))


def _autocov(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance by FFT, one row per sequence."""
    m, n = x.shape
    centered = x - x.mean(axis=1, keepdims=True)
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(centered, size, axis=1)
    acov = np.fft.irfft(f * np.conj(f), size, axis=1)[:, :n].real
    return acov / n


def ess(chains: np.ndarray) -> float:
    """Effective sample size over split chains.

    Combined autocorrelations follow the usual multi-chain construction
    (within-variance plus between-mean spread), truncated at the first
    negative paired sum and with the paired sums forced non-increasing.
    """
    seq = _split(chains)
    m, n = seq.shape
    acov = _autocov(seq)
    within = (acov[:, 0] * n / (n - 1)).mean()
    var_plus = (n - 1) / n * within + n * seq.mean(axis=1).var(ddof=1) / n
    if var_plus == 0.0:
        return float(m * n)
    rho = 1.0 - (within - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0

    # Geyer pairing: sums of adjacent lags are positive and monotone
    # for a reversible chain; enforce both and stop at the violation.
    max_pairs = (n - 1) // 2
    tau = 0.0
    prev_pair = np.inf
    for k in range(max_pairs):
        pair = rho[2 * k] + rho[2 * k + 1]
        if pair <= 0.0:
            break
        pair = min(pair, prev_pair)
        prev_pair = pair
        tau += pair
    tau = max(2.0 * tau - 1.0, 1.0 / np.log10(n) if n > 10 else 1.0)
    out = m * n / tau
    return float(min(out, m * n))


def scalar_summary(chains: np.ndarray) -> dict:
    """Mean, spread, interval, and convergence stats for one scalar."""
    c = np.asarray(chains, dtype=np.float64)
    flat = c.reshape(-1)
    lo, med, hi = np.percentile(flat, [5.0, 50.0, 95.0])
    return {
        "mean": float(flat.mean()),
        "sd": float(flat.std(ddof=1)) if flat.size > 1 else 0.0,
        "median": float(med),
        "ci90": (float(lo), float(hi)),
        "rhat": split_rhat(c),
        "ess": ess(c),
    }
