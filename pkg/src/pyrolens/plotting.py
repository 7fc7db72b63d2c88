"""SVG charts rendered with matplotlib, byte-reproducible across runs.

Figures are built on bare :class:`~matplotlib.figure.Figure` objects (no
pyplot state). SVG ids are salted with a constant, text stays as text and the
date stamp is dropped, so the same inputs always give the same bytes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import numpy as np  # noqa: E402
from matplotlib import rcParams  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

_RC = {"svg.hashsalt": "pyrolens", "svg.fonttype": "none", "font.family": "DejaVu Sans", "font.size": 9,
       "axes.spines.top": False, "axes.spines.right": False}


def _fig(w=6.4, h=4.0) -> Figure:
    rcParams.update(_RC)
    return Figure(figsize=(w, h))


def save_svg(fig: Figure, path) -> Path:
    rcParams.update(_RC)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches=None)
    return path


def correlation_heatmap(names: Sequence[str], R, path, title: str = "Feature correlation") -> Path:
    """Annotated grid with one ``cell-i-j`` rectangle per matrix entry."""
    R = np.asarray(R, dtype=np.float64)
    k = len(names)
    fig = _fig(7.0, 6.0)
    ax = fig.add_axes((0.25, 0.22, 0.6, 0.68))
    cmap = matplotlib.colormaps["RdBu_r"]
    for i in range(k):
        for j in range(k):
            v = R[i, j]
            ax.add_patch(Rectangle((j, k - 1 - i), 1, 1, facecolor=cmap((v + 1) / 2), edgecolor="white",
                                   gid=f"cell-{i}-{j}"))
            ax.text(j + 0.5, k - 0.5 - i, f"{v:.2f}", ha="center", va="center", fontsize=7,
                    color="white" if abs(v) > 0.6 else "black")
    ax.set_xlim(0, k)
    ax.set_ylim(0, k)
    ax.set_xticks(np.arange(k) + 0.5, labels=list(names), rotation=45, ha="right")
    ax.set_yticks(np.arange(k) + 0.5, labels=list(reversed(names)))
    ax.set_title(title)
    return save_svg(fig, path)


def grouped_bars(groups: Sequence[str], series: dict, path, title: str = "", ylabel: str = "score") -> Path:
    """One cluster per group, one bar per series key."""
    fig = _fig(7.5, 4.0)
    ax = fig.add_axes((0.1, 0.2, 0.72, 0.7))
    n = max(len(series), 1)
    width = 0.8 / n
    x = np.arange(len(groups))
    for s, (label, values) in enumerate(series.items()):
        ax.bar(x + (s - (n - 1) / 2) * width, values, width, label=label, gid=f"bar-{label}")
    ax.set_xticks(x, labels=list(groups), rotation=20, ha="right")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(loc="upper left", bbox_to_anchor=(1.0, 1.0), frameon=False)
    return save_svg(fig, path)


def horizontal_bars(names: Sequence[str], values, path, title: str = "", xlabel: str = "") -> Path:
    """Sorted horizontal bars, largest on top; signed values keep their sign."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(-np.abs(values), kind="stable")[::-1]
    fig = _fig(6.0, 0.5 + 0.45 * len(names))
    ax = fig.add_axes((0.3, 0.15, 0.6, 0.75))
    colors = ["#d62728" if v > 0 else "#1f77b4" for v in values[order]]
    ax.barh(np.arange(len(order)), values[order], color=colors)
    ax.set_yticks(np.arange(len(order)), labels=[names[i] for i in order])
    ax.axvline(0.0, color="black", linewidth=0.6)
    ax.set_xlabel(xlabel)
    ax.set_title(title)
    return save_svg(fig, path)


def shap_beeswarm(phi, X, names: Sequence[str], path, seed: int = 0,
                  title: str = "SHAP value (impact on model output)") -> Path:
    """Summary plot: one row per feature, points colored by feature value."""
    phi = np.asarray(phi, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    rank = np.argsort(-np.abs(phi).mean(axis=0), kind="stable")
    rng = np.random.default_rng(seed)
    fig = _fig(6.5, 0.8 + 0.55 * len(names))
    ax = fig.add_axes((0.25, 0.12, 0.65, 0.8))
    cmap = matplotlib.colormaps["coolwarm"]
    for row, j in enumerate(rank[::-1]):
        col = X[:, j]
        span = col.max() - col.min()
        c = (col - col.min()) / span if span > 0 else np.full(len(col), 0.5)
        jitter = rng.uniform(-0.3, 0.3, len(col))
        ax.scatter(phi[:, j], row + jitter, c=cmap(c), s=6, linewidths=0)
    ax.set_yticks(np.arange(len(rank)), labels=[names[j] for j in rank[::-1]])
    ax.axvline(0.0, color="grey", linewidth=0.6)
    ax.set_xlabel("SHAP value")
    ax.set_title(title)
    return save_svg(fig, path)


def line_curve(x, y, path, xlabel: str = "", ylabel: str = "", title: str = "") -> Path:
    fig = _fig(5.5, 3.8)
    ax = fig.add_axes((0.15, 0.15, 0.78, 0.75))
    ax.plot(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64), marker="o", markersize=3)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    return save_svg(fig, path)


def fit_scatter(y, y_hat, path, title: str = "Predicted vs observed") -> Path:
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    fig = _fig(4.8, 4.8)
    ax = fig.add_axes((0.15, 0.13, 0.78, 0.78))
    ax.scatter(y, y_hat, s=6, linewidths=0, alpha=0.7)
    lo = float(min(y.min(), y_hat.min()))
    hi = float(max(y.max(), y_hat.max()))
    ax.plot([lo, hi], [lo, hi], color="black", linewidth=0.8)
    ax.set_xlabel("observed")
    ax.set_ylabel("predicted")
    ax.set_title(title)
    return save_svg(fig, path)
