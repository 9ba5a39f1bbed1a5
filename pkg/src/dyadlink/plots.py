"""Matplotlib figures rendered alongside the delimited report files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_gof_scatter(rows, path: str) -> None:
    """Observed vs fitted normalized out/in degrees, one panel each."""
    rows = np.asarray(rows, dtype=np.float64)
    fig, axes = plt.subplots(1, 2, figsize=(9, 4.2))
    for ax, (obs, fit, title) in zip(axes, [(1, 2, "out-degree"),
                                            (3, 4, "in-degree")]):
        ax.scatter(rows[:, obs], rows[:, fit], s=14, alpha=0.7)
        lim = [0.0, max(1e-9, rows[:, [obs, fit]].max()) * 1.05]
        ax.plot(lim, lim, "k--", lw=1)
        ax.set_xlabel("observed")
        ax.set_ylabel("fitted")
        ax.set_title(title)
    _save(fig, path)


def render_loss_curve(grid, losses, chosen: float, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(grid, losses, marker="o", ms=3)
    ax.axvline(chosen, color="crimson", ls="--", lw=1,
               label=f"selected h = {chosen:.4g}")
    ax.set_xscale("log")
    ax.set_xlabel("bandwidth")
    ax.set_ylabel("shift-matching loss")
    ax.legend()
    _save(fig, path)


def render_effects(theta, lower, upper, n: int, path: str) -> None:
    """Point estimates with interval whiskers for the degree effects."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 4.2), sharey=True)
    blocks = [("sender effects", np.arange(n), slice(0, n)),
              ("receiver effects", np.arange(n - 1), slice(n, 2 * n - 1))]
    for ax, (title, xs, sl) in zip(axes, blocks):
        est = theta[sl]
        ax.errorbar(xs + 1, est,
                    yerr=[est - lower[sl], upper[sl] - est],
                    fmt="o", ms=3, lw=0.8, capsize=2)
        ax.axhline(0.0, color="gray", lw=0.8)
        ax.set_title(title)
        ax.set_xlabel("node")
    _save(fig, path)


def render_mc_targets(targets: dict, level: float, path: str) -> None:
    """Bias and coverage bars per Monte-Carlo target."""
    names = list(targets)
    bias = [targets[k]["bias"] for k in names]
    cp = [targets[k]["cp"] for k in names]
    fig, axes = plt.subplots(1, 2, figsize=(max(8, 1.2 * len(names)), 4.2))
    axes[0].bar(names, bias)
    axes[0].axhline(0.0, color="gray", lw=0.8)
    axes[0].set_title("bias")
    axes[1].bar(names, cp)
    axes[1].axhline(100 * (1 - level), color="crimson", ls="--", lw=1)
    axes[1].set_ylim(0, 100)
    axes[1].set_title("coverage (%)")
    for ax in axes:
        ax.tick_params(axis="x", rotation=60, labelsize=8)
    _save(fig, path)
