"""Figure rendering for CLI reports.

Every report command writes its delimited table first and then renders a
matching PNG next to it. Figures are a convenience view of the tables; the
tables remain the canonical, machine-readable output.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_loss_curves",
    "save_heatmap",
    "save_noise_curve",
    "save_feature_bars",
    "save_path_costs",
]


def save_loss_curves(histories: dict[str, list[float]], path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, history in histories.items():
        ax.plot(range(1, len(history) + 1), history, label=label)
    ax.set_xlabel("epoch")
    ax.set_ylabel("training loss")
    if len(histories) > 1:
        ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_heatmap(matrix: np.ndarray, path, xlabel: str = "", ylabel: str = "",
                 xticks=None, yticks=None, title: str = "",
                 colorbar_label: str = "") -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    display = np.ma.masked_invalid(matrix)
    fig, ax = plt.subplots(figsize=(6, 5))
    image = ax.imshow(display, cmap="viridis", aspect="auto")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if xticks is not None:
        ax.set_xticks(range(len(xticks)), [str(t) for t in xticks])
    if yticks is not None:
        ax.set_yticks(range(len(yticks)), [str(t) for t in yticks])
    if title:
        ax.set_title(title)
    fig.colorbar(image, ax=ax, label=colorbar_label)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_noise_curve(levels, maes, rmses, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(levels, maes, marker="o", label="MAE")
    ax.plot(levels, rmses, marker="s", label="RMSE")
    ax.set_xlabel("noise level (fraction of column std)")
    ax.set_ylabel("error")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_feature_bars(names, scores, path, ylabel: str = "mutual information") -> None:
    fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(names)), 4))
    ax.bar(range(len(names)), scores)
    ax.set_xticks(range(len(names)), [str(n) for n in names], rotation=45, ha="right")
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_path_costs(targets, costs, path, source: str) -> None:
    fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(targets)), 4))
    finite = [c if np.isfinite(c) else 0.0 for c in costs]
    ax.bar(range(len(targets)), finite)
    ax.set_xticks(range(len(targets)), [str(t) for t in targets])
    ax.set_ylabel(f"shortest-path cost from {source}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
