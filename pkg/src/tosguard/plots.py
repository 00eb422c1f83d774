"""Report figures rendered next to the delimited outputs.

All entry points write a PNG to the given path and return that path;
matplotlib is forced onto the Agg backend so the CLI can run headless.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .meta import MetaResult
from .metrics import RankingRow


def save_cooccurrence_heatmap(
    matrix: np.ndarray,
    labels: Sequence[str],
    path: str | Path,
    title: str = "Label co-occurrence",
) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(0.6 * len(labels) + 2.5, 0.6 * len(labels) + 2))
    image = ax.imshow(matrix, cmap="Blues")
    ax.set_xticks(range(len(labels)), labels, rotation=45, ha="right", fontsize=8)
    ax.set_yticks(range(len(labels)), labels, fontsize=8)
    for i in range(len(labels)):
        for j in range(len(labels)):
            if matrix[i, j]:
                ax.text(j, i, str(int(matrix[i, j])), ha="center", va="center", fontsize=7)
    ax.set_title(title)
    fig.colorbar(image, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_ranking_chart(rows: Sequence[RankingRow], path: str | Path) -> Path:
    """Horizontal bars of mean macro-F1 per method with combined-std error bars."""
    path = Path(path)
    methods = [r.method for r in rows][::-1]
    means = [r.mean_macro_f1 for r in rows][::-1]
    stds = [r.combined_std for r in rows][::-1]
    fig, ax = plt.subplots(figsize=(8, 0.45 * len(rows) + 1.5))
    positions = np.arange(len(methods))
    ax.barh(positions, means, xerr=stds, color="#4878a8", capsize=3)
    ax.set_yticks(positions, methods, fontsize=8)
    ax.set_xlabel("Mean macro-F1 across tasks")
    ax.set_xlim(0, 1)
    ax.set_title("Method ranking (error bars: combined std)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_forest_plot(
    results: Sequence[MetaResult],
    path: str | Path,
    metric: str = "macro",
) -> Path:
    """Pooled means with 95% CIs per configuration, best at the top."""
    path = Path(path)
    picked = [getattr(r, metric) for r in results]
    names = [r.config_id for r in results]
    fig, ax = plt.subplots(figsize=(8, 0.5 * len(results) + 1.5))
    ys = np.arange(len(results))[::-1]
    for y, m in zip(ys, picked):
        ax.plot([m.ci_low, m.ci_high], [y, y], color="#444444", lw=1.5)
        ax.plot(m.pooled_mean, y, "o", color="#4878a8", markersize=6)
    ax.set_yticks(ys, names, fontsize=8)
    ax.set_xlabel(f"Random-effects {metric}-F1 (95% CI)")
    ax.set_title("Retrieval configuration ranking")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_error_breakdown_chart(
    decompositions: dict[str, "object"],
    path: str | Path,
) -> Path:
    """Stacked retrieval vs generation error bars per task."""
    path = Path(path)
    tasks = list(decompositions)
    ret = [decompositions[t].retrieval_errors for t in tasks]
    gen = [decompositions[t].generation_errors for t in tasks]
    fig, ax = plt.subplots(figsize=(6, 4))
    positions = np.arange(len(tasks))
    ax.bar(positions, ret, label="retrieval errors", color="#b85450")
    ax.bar(positions, gen, bottom=ret, label="generation errors", color="#4878a8")
    ax.set_xticks(positions, tasks)
    ax.set_ylabel("False negatives")
    ax.set_title("False-negative decomposition")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
