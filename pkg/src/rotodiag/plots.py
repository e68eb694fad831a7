"""SVG renderings of sweep curves and feature importance tables."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .features import DESCRIPTIVE_NAMES
from .search import Leaderboard


def plot_sweep_svg(board: Leaderboard, axis_path: str, out_path) -> None:
    """Metric vs. axis value, best entry per value across the other axes."""
    best_at = {}
    for e in board.entries:
        if e.error is not None or axis_path not in e.values:
            continue
        v = e.values[axis_path]
        score = e.mean_metrics[board.metric]
        if v not in best_at or score > best_at[v]:
            best_at[v] = score
    if not best_at:
        raise ValueError(f"no successful entries carry axis {axis_path!r}")
    xs = sorted(best_at)
    ys = [best_at[x] for x in xs]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(len(xs)), ys, marker="o")
    ax.set_xticks(range(len(xs)))
    ax.set_xticklabels([str(x) for x in xs])
    ax.set_xlabel(axis_path)
    ax.set_ylabel(board.metric)
    ax.set_title(f"{board.metric} vs {axis_path}")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, format="svg")
    plt.close(fig)


def plot_importance_svg(fractions: np.ndarray, out_path, top: int = 20) -> None:
    """Horizontal bar chart of the top feature-importance fractions."""
    order = np.argsort(fractions)[::-1][:top]
    names = [DESCRIPTIVE_NAMES[i] if i < len(DESCRIPTIVE_NAMES) else f"f{i:03d}"
             for i in order]
    vals = fractions[order]
    fig, ax = plt.subplots(figsize=(7, 0.32 * len(order) + 1.2))
    ax.barh(range(len(order)), vals[::-1])
    ax.set_yticks(range(len(order)))
    ax.set_yticklabels(names[::-1], fontsize=8)
    ax.set_xlabel("importance fraction")
    fig.tight_layout()
    fig.savefig(out_path, format="svg")
    plt.close(fig)
