"""Figure rendering for the report paths.

Every plotting entry point takes already-computed rows/results and writes a
PNG next to the delimited output; nothing here recomputes numbers.
"""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .linear_code import SimResult  # noqa: E402
from .search import SweepRow  # noqa: E402


def save_pe_curve(results: Sequence[SimResult], path: str) -> str:
    """Block-error estimate vs blocklength with 95% Wilson bars, log-y."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ns = [r.n for r in results]
    pe = [max(r.p_e_hat, 1e-12) for r in results]
    los, his = [], []
    for r in results:
        lo, hi = r.wilson_interval()
        los.append(max(r.p_e_hat - lo, 0.0))
        his.append(max(hi - r.p_e_hat, 0.0))
    ax.errorbar(ns, pe, yerr=[los, his], fmt="o-", capsize=3, lw=1.2)
    ax.set_yscale("log")
    ax.set_xlabel("blocklength n")
    ax.set_ylabel(r"$\hat{P}_e$")
    r0 = results[0]
    ax.set_title(
        f"q={r0.q}, delta={r0.delta:g}, sigma={r0.sigma:g}, gamma={r0.gamma:g}, "
        f"{r0.trials} trials")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_sweep_map(rows: Sequence[SweepRow], path: str) -> str:
    """Scatter of the sweep grid; improved points highlighted."""
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    imp = [r for r in rows if r.improved]
    rest = [r for r in rows if not r.improved]
    if rest:
        ax.scatter([r.sigma for r in rest], [r.gamma for r in rest],
                   c="tab:gray", s=45, label="not improved")
    if imp:
        ax.scatter([r.sigma for r in imp], [r.gamma for r in imp],
                   c="tab:red", marker="s", s=55,
                   label="feasible and above product-form ceiling")
    ax.set_xlabel(r"$\sigma$")
    ax.set_ylabel(r"$\gamma$")
    delta = rows[0].delta if rows else 0.0
    ax.set_title(f"improvement region, delta={delta:g}")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
