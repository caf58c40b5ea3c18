"""Figure builders; all return a matplotlib Figure, never show a window."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGSIZE = (8.0, 4.5)


def plot_branch(header: dict, points: list) -> plt.Figure:
    """Two panels: amplitude vs layer width, amplitude vs shape size."""
    xi = np.array([p["xi"] for p in points])
    a = np.array([p["a"] for p in points])
    # coefficient-space size of the full shape xi * cos(m alpha) + w
    size = np.array([np.hypot(p["xi"], np.linalg.norm(p["w_coeffs"]))
                     for p in points])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=FIGSIZE)
    for ax, y, lab in ((ax1, a, "layer width a"),
                       (ax2, size, "shape coefficient norm")):
        ax.plot(xi, y, "o-", ms=4)
        ax.set_xlabel(r"kernel amplitude $\xi$")
        ax.set_ylabel(lab)
        ax.grid(True, alpha=0.3)
    fig.suptitle(f"branch m={header.get('m')} "
                 f"(dlambda/da={header.get('dlambda_da')})")
    fig.tight_layout()
    return fig


def plot_levelsets(curves: dict) -> plt.Figure:
    """Closed level-set polylines, equal aspect."""
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    for s, pts in sorted(curves.items()):
        closed = np.vstack([pts, pts[:1]])
        ax.plot(closed[:, 0], closed[:, 1], lw=1.2, label=f"s = {s:g}")
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.legend(loc="upper right", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def plot_vorticity(raster: np.ndarray, extent: float,
                   curves: dict | None = None) -> plt.Figure:
    """Vorticity heatmap with optional level-set overlay."""
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    im = ax.imshow(raster, origin="lower", cmap="magma",
                   extent=(-extent, extent, -extent, extent),
                   vmin=0.0, vmax=max(1.0, float(raster.max())))
    if curves:
        for _, pts in sorted(curves.items()):
            closed = np.vstack([pts, pts[:1]])
            ax.plot(closed[:, 0], closed[:, 1], color="w", lw=0.8, alpha=0.8)
    fig.colorbar(im, ax=ax, shrink=0.85, label="vorticity")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.tight_layout()
    return fig


def plot_residual_history(points: list) -> plt.Figure:
    """Solver residual per iteration for every branch point, log scale."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    floor = 1e-17
    for p in points:
        hist = np.maximum(np.abs(p["residual_history"]), floor)
        ax.semilogy(np.arange(len(hist)), hist, "o-", ms=4,
                    label=rf"$\xi$ = {p['xi']:g}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("residual (L2)")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    return fig
