"""SVG output. CSV files are the record; these figures are for eyeballing."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp so figures are stable across runs
matplotlib.rcParams["svg.hashsalt"] = "gainsched"
_META = {"Date": None}


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def tradeoff_plot(path, curves: dict[str, tuple[np.ndarray, np.ndarray]]) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, (rate, cost) in curves.items():
        ax.plot(rate, cost, marker="o", label=label)
    ax.set_xlabel("average communication rate")
    ax.set_ylabel("mean final cost J(w_K)")
    ax.legend()
    _save(fig, path)


def histogram_plot(path, panels: dict[str, dict[str, tuple[np.ndarray, np.ndarray]]], xlabel: str) -> None:
    """``panels`` maps panel title -> {series label: (counts, edges)}."""
    fig, axes = plt.subplots(len(panels), 1, figsize=(5, 3 * len(panels)), squeeze=False)
    for ax, (title, series) in zip(axes[:, 0], panels.items()):
        for label, (counts, edges) in series.items():
            ax.stairs(counts, edges, label=label, alpha=0.8)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("count")
        ax.legend()
    _save(fig, path)


def envelope_plot(path, curves: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]) -> None:
    """``curves`` maps label -> (empirical mean, standard error, bound)."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, (mean, se, bound) in curves.items():
        k = np.arange(mean.size)
        line = ax.plot(k, mean, label=f"{label} empirical")[0]
        ax.fill_between(k, mean - 2 * se, mean + 2 * se, color=line.get_color(), alpha=0.2)
        ax.plot(k, bound, linestyle="--", color=line.get_color(), label=f"{label} envelope")
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("E J(w_k)")
    ax.legend(fontsize="small")
    _save(fig, path)


def cost_plot(path, mean: np.ndarray, se: np.ndarray) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    k = np.arange(mean.size)
    ax.plot(k, mean)
    ax.fill_between(k, mean - 2 * se, mean + 2 * se, alpha=0.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean cost across tasks")
    _save(fig, path)
