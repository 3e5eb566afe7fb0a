"""Static figures written next to the CSV/JSON outputs (non-interactive Agg backend)."""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _finite_pos(v) -> bool:
    try:
        v = float(v)
    except (TypeError, ValueError):
        return False
    return math.isfinite(v) and v > 0


def plot_grid(rows: list[dict], path) -> None:
    """Loss against wall time per method: crosses for train, dots for test."""
    fig, ax = plt.subplots(figsize=(6, 4))
    methods = sorted({r["method"] for r in rows})
    for i, method in enumerate(methods):
        color = f"C{i}"
        sel = [r for r in rows if r["method"] == method]
        tr = [(float(r["wall_time_s"]), float(r["train_loss"])) for r in sel
              if _finite_pos(r["train_loss"]) and _finite_pos(r["wall_time_s"])]
        te = [(float(r["wall_time_s"]), float(r["test_loss"])) for r in sel
              if _finite_pos(r["test_loss"]) and _finite_pos(r["wall_time_s"])]
        if tr:
            ax.scatter(*zip(*tr), marker="x", color=color, label=f"{method} train")
        if te:
            ax.scatter(*zip(*te), marker="o", s=12, color=color, label=f"{method} test")
    ax.set_yscale("log")
    ax.set_xlabel("training time [s]")
    ax.set_ylabel("MSE loss")
    if methods:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_loss_history(epochs, train, test, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(epochs, train, label="train")
    if any(_finite_pos(t) for t in test):
        ax.semilogy(epochs, test, label="test")
    ax.set_xlabel("epoch")
    ax.set_ylabel("MSE loss")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_mae(orders, maes, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    pts = [(p, m) for p, m in zip(orders, maes) if _finite_pos(m)]
    if pts:
        ax.semilogy(*zip(*pts), marker="o")
    ax.set_xlabel("truncation order p")
    ax.set_ylabel("coefficient MAE")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_param_stats(stats: dict, path) -> None:
    """``stats`` maps a label to ``(mean, min, max)``; bars span min to max."""
    labels = list(stats)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for i, label in enumerate(labels):
        mean, lo, hi = stats[label]
        ax.errorbar([i], [mean], yerr=[[mean - lo], [hi - mean]], fmt="o", capsize=4)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels)
    ax.set_ylabel("parameter value")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
