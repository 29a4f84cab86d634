"""Matplotlib figures for the report command.

Figures are written as PNG with the software-version metadata stripped so
that reruns produce identical files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "picosum",
}

PNG_METADATA = {"Software": None}


def size(scale: float = 1.0, ratio: float | None = None) -> tuple[float, float]:
    width = 6.4 * scale
    if ratio is None:
        ratio = (np.sqrt(5.0) - 1.0) / 2.0
    return width, width * ratio


def save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=150, bbox_inches="tight", metadata=PNG_METADATA)
    plt.close(fig)
    return path


def grouped_bars(
    groups: Sequence[str],
    series: dict[str, Sequence[float]],
    path: str | Path,
    title: str = "",
    ylabel: str = "",
    ylim: tuple[float, float] | None = None,
) -> Path:
    """One cluster per group (metric), one bar per series (model)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=size(1.0))
        n = max(len(series), 1)
        width = 0.8 / n
        x = np.arange(len(groups))
        for i, (name, values) in enumerate(series.items()):
            ax.bar(x + (i - (n - 1) / 2) * width, values, width, label=name)
        ax.set_xticks(x)
        ax.set_xticklabels(groups)
        ax.set_ylabel(ylabel)
        if ylim is not None:
            ax.set_ylim(*ylim)
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend(frameon=False, ncol=min(n, 3))
        return save(fig, path)


def attention_pattern(allowed: np.ndarray, global_mask: np.ndarray, pad_mask: np.ndarray, path: str | Path, title: str = "") -> Path:
    """Dense attendance matrix with global and padded positions marked on the axes."""
    n = allowed.shape[0]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=size(0.8, ratio=1.0))
        ax.imshow(allowed, cmap="Greys", interpolation="nearest", vmin=0, vmax=1)
        for pos in np.flatnonzero(global_mask):
            ax.axhline(pos, color="tab:orange", lw=0.4, alpha=0.6)
        for pos in np.flatnonzero(pad_mask):
            ax.axvline(pos, color="tab:blue", lw=0.4, alpha=0.4)
        ax.set_xlabel("key position")
        ax.set_ylabel("query position")
        ax.set_xlim(-0.5, n - 0.5)
        ax.set_ylim(n - 0.5, -0.5)
        if title:
            ax.set_title(title)
        return save(fig, path)
