"""File-only matplotlib renderings saved next to delimited report output."""
from __future__ import annotations

from pathlib import Path

import numpy as np


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def save_tail_figure(estimate, path) -> Path:
    """Log tail probability against n with the fitted decay line."""
    plt = _plt()
    p = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    pos = estimate.tail > 0
    ax.semilogy(estimate.ns[pos], estimate.tail[pos], "o", ms=3, label="empirical tail")
    ax.fill_between(estimate.ns[pos], np.maximum(estimate.ci_lo[pos], 1e-12),
                    np.maximum(estimate.ci_hi[pos], 1e-12), alpha=0.2)
    fit = estimate.fit
    if fit.available:
        ns = np.array([fit.n_lo, fit.n_hi])
        anchor = estimate.tail[fit.n_lo]
        ax.semilogy(ns, anchor * np.exp(-fit.c_hat * (ns - fit.n_lo)), "-",
                    label=f"fit C={fit.c_hat:.3f}, R2={fit.r_squared:.3f}")
    ax.set_xlabel("n")
    ax.set_ylabel("P(shared range > n)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(p, dpi=160)
    plt.close(fig)
    return p


def save_sweep_figure(sweep, path) -> Path:
    """Power and false-alarm rate across the sweep points."""
    plt = _plt()
    p = Path(path)
    rows = sweep.rows()
    x = np.arange(len(rows))
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.errorbar(x, [r["power"] for r in rows],
                yerr=[[r["power"] - (1 - r["type_ii_hi"]) for r in rows],
                      [(1 - r["type_ii_lo"]) - r["power"] for r in rows]],
                marker="o", label="power")
    ax.errorbar(x, [r["type_i"] for r in rows],
                yerr=[[r["type_i"] - r["type_i_lo"] for r in rows],
                      [r["type_i_hi"] - r["type_i"] for r in rows]],
                marker="s", label="false alarm")
    ax.set_xticks(x)
    ax.set_xticklabels([r["point"] for r in rows], rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("rate")
    ax.set_ylim(-0.05, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(p, dpi=160)
    plt.close(fig)
    return p


def save_report_figure(report, path) -> Path:
    """Per-arm statistic distributions for a single experiment."""
    plt = _plt()
    p = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    for arm, color in (("P", "tab:blue"), ("Q", "tab:orange")):
        vals = report.per_trial_statistics.get(arm, [])
        if vals:
            ax.hist(vals, bins=30, alpha=0.55, color=color, label=f"{arm} arm")
    ax.set_xlabel("detector statistic")
    ax.set_ylabel("trials")
    ax.legend()
    fig.tight_layout()
    fig.savefig(p, dpi=160)
    plt.close(fig)
    return p


def save_tree_analysis_figure(analysis: dict, path) -> Path:
    """Cut-sum decay across depths plus the ray dimension histogram."""
    plt = _plt()
    p = Path(path)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    for beta, sums in analysis.get("cut_sums", {}).items():
        ax1.semilogy(range(1, len(sums) + 1), sums, marker=".", label=f"beta={beta}")
    ax1.set_xlabel("cut depth")
    ax1.set_ylabel("level cut sum")
    ax1.legend(fontsize=8)
    hist = analysis.get("dimension_histogram", {})
    if hist:
        ax2.bar([float(k) for k in hist.keys()], list(hist.values()),
                width=0.8 * analysis.get("dimension_bin_width", 0.05))
    lo, hi = analysis.get("branching_bracket", (None, None))
    if lo is not None:
        ax2.axvline(np.log(0.5 * (lo + hi)), color="k", ls="--",
                    label="log br estimate")
        ax2.legend(fontsize=8)
    ax2.set_xlabel("ray local dimension")
    ax2.set_ylabel("sampled rays")
    fig.tight_layout()
    fig.savefig(p, dpi=160)
    plt.close(fig)
    return p


def render_for_report(report, emitted_path: Path) -> Path:
    """Choose a rendering that matches the emitted report object."""
    target = emitted_path.with_suffix(".png")
    from .harness import DetectionReport, SweepResult
    if isinstance(report, SweepResult):
        return save_sweep_figure(report, target)
    if isinstance(report, DetectionReport):
        return save_report_figure(report, target)
    return target
