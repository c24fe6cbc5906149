"""Top-down path plots written as SVG."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_paths(positions, targets, path, title: str = "", r_min: float | None = None) -> None:
    """xy paths of every robot: start dot, target cross, final footprint if ``r_min`` given."""
    X = np.asarray(positions, dtype=float)
    T = np.asarray(targets, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 5))
    colors = plt.cm.tab20(np.linspace(0, 1, max(X.shape[1], 2)))
    for i in range(X.shape[1]):
        c = colors[i % len(colors)]
        ax.plot(X[:, i, 0], X[:, i, 1], "-", color=c, lw=1.2)
        ax.plot(X[0, i, 0], X[0, i, 1], "o", color=c, ms=4)
        ax.plot(T[i, 0], T[i, 1], "x", color=c, ms=6)
        if r_min:
            ax.add_patch(plt.Circle(X[-1, i, :2], r_min / 2, color=c, fill=False, lw=0.6))
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    if title:
        ax.set_title(title)
    ax.grid(True, lw=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
