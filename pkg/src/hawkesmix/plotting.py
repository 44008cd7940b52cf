"""Figures and gnuplot-style data files for benchmark and fit reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.figsize": (4.5, 3.0),
    "savefig.dpi": 150,
}


def plot_benchmark(result, path) -> Path:
    """Bar chart of mean test log-likelihood per method with 95% intervals."""
    path = Path(path)
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        names = [r.method for r in result.rows]
        means = [r.mean_loglike for r in result.rows]
        errs = [0.0 if r.ci95 is None else r.ci95 for r in result.rows]
        ax.bar(names, means, yerr=errs, capsize=4, color="0.6", edgecolor="k")
        lo = min(m - e for m, e in zip(means, errs))
        hi = max(m + e for m, e in zip(means, errs))
        pad = 0.1 * (hi - lo) + 1e-3
        ax.set_ylim(lo - pad, hi + pad)
        ax.set_ylabel("test log-likelihood per event")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path


def write_curve_dat(report, path) -> Path:
    """Whitespace-delimited per-iteration columns, readable by gnuplot."""
    path = Path(path)
    lines = ["# iteration objective easy_size L zeta seconds"]
    for r in report.records:
        lines.append(f"{r.iteration} {r.objective!r} {r.easy_size} {r.L} {r.zeta!r} {r.seconds!r}")
    path.write_text("\n".join(lines) + "\n")
    return path


def plot_convergence(report, path) -> Path:
    """Outer-loop objective and easy-set size against iteration."""
    path = Path(path)
    it = [r.iteration for r in report.records]
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.plot(it, [r.objective for r in report.records], "k.-", label="objective")
        ax.set_xlabel("outer iteration")
        ax.set_ylabel("objective")
        ax2 = ax.twinx()
        ax2.step(it, [r.easy_size for r in report.records], "C0", where="post", label="selected")
        ax2.axhline(report.target, color="C0", ls=":", lw=1)
        ax2.set_ylabel("selected sequences", color="C0")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_complexity(rows, path) -> Path:
    """Log-log plot of outer-iteration time against sequence length."""
    path = Path(path)
    x = np.array([r.I for r in rows], float)
    y = np.array([r.seconds for r in rows], float)
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.loglog(x, y, "ko-", label="measured")
        ax.loglog(x, y[0] * (x / x[0]) ** 2, "k:", label="quadratic")
        ax.set_xlabel("events per sequence")
        ax.set_ylabel("seconds per outer iteration")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path
