"""Figure rendering for the report paths.

Every CLI report command can drop PNG figures next to its delimited
output: log-log regret curves with their fitted exponents, per-scenario
hardness bars, and the sparse-feedback regret-versus-bound plot.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import ConvexCheckResult, FitResult, HardnessRow, SweepRow


def plot_sweep(rows: Sequence[SweepRow], fit: FitResult | None, path: str | Path,
               title: str = "regret vs horizon") -> None:
    ts = np.array([r.horizon for r in rows], dtype=float)
    regs = np.array([r.mean_regret for r in rows])
    errs = np.array([r.stderr for r in rows])
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.errorbar(ts, regs, yerr=errs, fmt="o", capsize=3, label="measured regret")
    if fit is not None and np.all(regs > 0):
        grid = np.geomspace(ts.min(), ts.max(), 64)
        scale = np.exp(np.mean(np.log(regs) - fit.exponent * np.log(ts)))
        ax.plot(grid, scale * grid**fit.exponent, "--",
                label=f"fit: T^{fit.exponent:.3f} (r$^2$={fit.r2:.3f})")
    ax.set_xscale("log")
    if np.all(regs > 0):
        ax.set_yscale("log")
    ax.set_xlabel("horizon T")
    ax.set_ylabel("mean regret")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_hardness(rows: Sequence[HardnessRow], path: str | Path) -> None:
    scenarios = sorted({r.scenario for r in rows})
    kinds = sorted({r.forecaster for r in rows})
    width = 0.8 / max(len(kinds), 1)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    x = np.arange(len(scenarios))
    for i, kind in enumerate(kinds):
        vals = [next((r.avg_regret for r in rows if r.forecaster == kind and r.scenario == s),
                     np.nan) for s in scenarios]
        errs = [next((r.stderr for r in rows if r.forecaster == kind and r.scenario == s), 0.0)
                for s in scenarios]
        ax.bar(x + i * width, vals, width, yerr=errs, capsize=3, label=kind)
    ax.axhline(0.0, color="k", linewidth=0.8)
    ax.set_xticks(x + width * (len(kinds) - 1) / 2)
    ax.set_xticklabels(scenarios)
    ax.set_ylabel("average regret (regret / T)")
    ax.set_title(f"hardness construction, T={rows[0].horizon}" if rows else "hardness")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_convex(result: ConvexCheckResult, path: str | Path) -> None:
    alphas = sorted(result.mean_regret, reverse=True)
    inv = np.array([1.0 / a for a in alphas])
    means = np.array([result.mean_regret[a] for a in alphas])
    bounds = np.array([result.bounds[a] for a in alphas])
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(inv, means, "o-", label="mean regret")
    ax.plot(inv, bounds, "s--", label="proven bound")
    grid = np.geomspace(inv.min(), inv.max(), 64)
    scale = np.exp(np.mean(np.log(means) - result.fit.exponent * np.log(inv)))
    ax.plot(grid, scale * grid**result.fit.exponent, ":",
            label=f"fit: (1/$\\alpha$)^{result.fit.exponent:.3f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(r"1/$\alpha$")
    ax.set_ylabel("regret")
    ax.set_title("sparse-feedback gradient descent")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_cumulative_losses(losses_by_label: dict[str, np.ndarray], path: str | Path,
                           title: str = "cumulative loss") -> None:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for label, losses in losses_by_label.items():
        ax.plot(np.cumsum(losses), label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("cumulative loss")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
