"""SVG figures for runs, sweeps, and fits. Headless backend only."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .metrics import ExploitationReport, RegretCurve  # noqa: E402


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_regret(curves: dict[str, RegretCurve], path: str | Path,
                *, title: str = "", ylabel: str = "cumulative regret") -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, c in curves.items():
        ax.plot(c.rounds, c.mean, label=label, linewidth=1.6)
        ax.fill_between(c.rounds, c.mean - c.se, c.mean + c.se, alpha=0.2)
    ax.set_xlabel("round")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_exploitation(reports: dict[str, ExploitationReport], path: str | Path,
                      *, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, rep in reports.items():
        xs = sorted(rep.windows)
        ys = [rep.windows[w] for w in xs]
        ax.plot(xs, ys, marker="o", label=label, linewidth=1.4)
    ax.set_xlabel("rounds considered")
    ax.set_ylabel("exploitation rate")
    ax.set_ylim(0.0, 1.0)
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_group_means(xs: list[float], stats: dict[str, list[dict]], path: str | Path,
                     *, xlabel: str, title: str = "") -> Path:
    """One errorbar track per group scalar across a sweep grid.

    `stats` maps scalar name to a list (same length as xs) of summaries
    with `mean` and `ci90` entries.
    """
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, rows in stats.items():
        means = [r["mean"] for r in rows]
        lo = [r["mean"] - r["ci90"][0] for r in rows]
        hi = [r["ci90"][1] - r["mean"] for r in rows]
        ax.errorbar(xs, means, yerr=[lo, hi], marker="o", capsize=3, label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("posterior group mean")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    return _save(fig, path)
