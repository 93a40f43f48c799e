"""Figures for benchmark reports (files only, no display)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .bench import BenchReport  # noqa: E402

_LABELS = {
    "docs": "documents in the collection",
    "keywords": "keywords per document",
    "k": "retrieved documents k",
}


def plot_report(report: BenchReport, path) -> Path:
    """Measured points with the least-squares line and its R² in the legend."""
    path = Path(path)
    slope, intercept, r2 = report.fit()
    x = np.asarray(report.points, dtype=float)
    fig, ax = plt.subplots(figsize=(5.0, 3.6), dpi=120)
    ax.plot(x, report.millis, "o", color="#1f4e79", label="measured (best of repeats)")
    xs = np.linspace(x.min(), x.max(), 50)
    ax.plot(xs, slope * xs + intercept, "-", color="#c0504d", lw=1.2, label=f"linear fit, R² = {r2:.3f}")
    ax.set_xlabel(_LABELS.get(report.var, report.var))
    ax.set_ylabel("wall time (ms)")
    ax.set_title(f"{report.phase} time vs {report.var}")
    ax.grid(alpha=0.3)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path
