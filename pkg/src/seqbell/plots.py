"""Figure rendering for sweep tables and certification reports.

Figures are rendered headlessly and written next to the delimited output;
the file extension picks the format (png, pdf, svg).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .montecarlo import EstimateReport, history_to_str
from .optimize import SurfacePoint, SweepPoint


def sweep_curve_figure(points: list[SweepPoint], p: float, c: float):
    """Per-step and total certified bits against the first strength."""
    xs = [pt.xi1 for pt in points]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(xs, [pt.h1 for pt in points], label="step 1", lw=1.2)
    ax.plot(xs, [pt.h2 for pt in points], label="step 2", lw=1.2)
    ax.plot(xs, [pt.total for pt in points], label="total", lw=1.8, color="k")
    ax.set_xlabel(r"$\xi_1$ (rad)")
    ax.set_ylabel("certified bits")
    ax.set_title(f"two-step extraction, p={p:g}, c={c:g}")
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return fig


def sweep_surface_figure(points: list[SurfacePoint], p: float, c: float):
    """Heatmap of the three-step total over the strength grid."""
    xs = np.array(sorted({pt.xi1 for pt in points}))
    ys = np.array(sorted({pt.xi2 for pt in points}))
    grid = np.full((len(ys), len(xs)), np.nan)
    xi = {v: i for i, v in enumerate(xs)}
    yi = {v: i for i, v in enumerate(ys)}
    for pt in points:
        grid[yi[pt.xi2], xi[pt.xi1]] = pt.total
    fig, ax = plt.subplots(figsize=(6.0, 4.8))
    mesh = ax.pcolormesh(xs, ys, grid, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="total certified bits")
    ax.set_xlabel(r"$\xi_1$ (rad)")
    ax.set_ylabel(r"$\xi_2$ (rad)")
    ax.set_title(f"three-step extraction, p={p:g}, c={c:g}")
    fig.tight_layout()
    return fig


def report_figure(report: EstimateReport):
    """Min-entropy per (step, history) with error bars where available."""
    labels, values, errors = [], [], []
    for entry in report.entries:
        hist = history_to_str(entry.history) or "-"
        labels.append(f"step {entry.step}\n[{hist}]")
        values.append(
            entry.h_min_mean if entry.h_min_mean is not None else entry.certificate.h_min
        )
        errors.append(entry.h_min_std if entry.h_min_std is not None else 0.0)
    xs = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(max(4.0, 1.0 + 0.9 * len(labels)), 4.0))
    ax.bar(xs, values, yerr=errors, capsize=3, color="#4878a8")
    ax.set_xticks(xs)
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("certified bits per outcome")
    ax.set_title(f"certified min-entropy ({report.trials} trials)")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    return fig


def save_figure(fig, path) -> None:
    fig.savefig(path, dpi=160)
    plt.close(fig)
