"""Report figures. Everything renders through the Agg canvas straight to
files; pyplot and its global state are never touched."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _figure(width: float = 5.0, height: Optional[float] = None) -> Figure:
    fig = Figure(figsize=(width, height or width * GOLDEN))
    FigureCanvasAgg(fig)
    return fig


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    return path


def plot_alpha_bar(schedule, path) -> Path:
    with matplotlib.rc_context(STYLE):
        fig = _figure()
        ax = fig.add_subplot()
        t = np.arange(schedule.T + 1)
        ax.plot(t, schedule.alpha_bars, label=r"$\bar\alpha_t$")
        ax.plot(t, 1.0 - schedule.alpha_bars, "--", label=r"$1-\bar\alpha_t$")
        ax.set_xlabel("step t")
        ax.set_ylabel("variance share")
        ax.legend(frameon=False)
        return _save(fig, path)


def _plane_axes(points: np.ndarray):
    """Pick the two world axes with the largest spread for a top-down view."""
    spread = np.ptp(points, axis=0) if len(points) else np.ones(3)
    return tuple(sorted(np.argsort(-spread, kind="stable")[:2]))


def plot_graph(graph, path, trajectories: Sequence = (), cloud=None) -> Path:
    names = "xyz"
    centers = np.array([graph.centers[n] for n in graph.nodes])
    i, j = _plane_axes(centers)
    with matplotlib.rc_context(STYLE):
        fig = _figure(5.0, 5.0)
        ax = fig.add_subplot()
        if cloud is not None and len(cloud):
            ax.scatter(cloud.points[:, i], cloud.points[:, j], s=1, c="0.75", label="occupancy")
        for a, b, _ in graph.edges():
            pa, pb = graph.centers[a], graph.centers[b]
            ax.plot([pa[i], pb[i]], [pa[j], pb[j]], color="0.6", lw=0.6)
        ax.scatter(centers[:, i], centers[:, j], s=8, c="k", zorder=3, label="cameras")
        for k, traj in enumerate(trajectories):
            pts = np.array([graph.centers[n] for n in traj.nodes])
            ax.plot(pts[:, i], pts[:, j], lw=1.8, zorder=4, label=f"path {k}" if k < 5 else None)
        ax.set_xlabel(f"{names[i]} (m)")
        ax.set_ylabel(f"{names[j]} (m)")
        ax.set_aspect("equal", adjustable="datalim")
        ax.legend(frameon=False, loc="best")
        return _save(fig, path)


def plot_gas(report, path) -> Path:
    with matplotlib.rc_context(STYLE):
        fig = _figure()
        ax = fig.add_subplot()
        ax.hist(report.scores, bins=np.linspace(0, 1, 21), color="0.4")
        ax.axvline(report.mean, color="C3", label=f"mean {report.mean:.3f}")
        ax.axvline(report.pooled, color="C0", ls="--", label=f"pooled {report.pooled:.3f}")
        ax.set_xlabel("GAS")
        ax.set_ylabel("pairs")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_instruction_lengths(lengths: Sequence[int], path) -> Path:
    with matplotlib.rc_context(STYLE):
        fig = _figure()
        ax = fig.add_subplot()
        if len(lengths):
            ax.hist(lengths, bins=min(40, max(1, len(set(lengths)))), color="0.4")
        ax.set_xlabel("instruction length (tokens)")
        ax.set_ylabel("triplets")
        return _save(fig, path)


def plot_embeddings(embeddings: np.ndarray, path) -> Path:
    emb = np.atleast_2d(embeddings)
    with matplotlib.rc_context(STYLE):
        fig = _figure(6.0, 1.0 + 0.25 * len(emb))
        ax = fig.add_subplot()
        im = ax.imshow(emb, aspect="auto", cmap="coolwarm", vmin=-1, vmax=1, interpolation="nearest")
        ax.set_xlabel("embedding channel")
        ax.set_ylabel("frame")
        fig.colorbar(im, ax=ax, fraction=0.03)
        return _save(fig, path)
