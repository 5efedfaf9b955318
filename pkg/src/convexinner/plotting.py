"""SVG figures: a planar set in light gray, its inner approximation in dark gray."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402

from .semialg import SemialgebraicSet, rasterize  # noqa: E402

LIGHT = "#d0d0d0"
DARK = "#707070"


def plot_regions(path, S: SemialgebraicSet, bbox, Sbar: SemialgebraicSet | None = None,
                 resolution: int = 400, points=(), trajectories=(), title: str = "",
                 labels=("x1", "x2")) -> None:
    """Raster S (light) and Sbar (dark) over bbox; mark points and overlay (x1, x2) curves."""
    if S.n != 2:
        raise ValueError("only planar sets can be plotted")
    fig, ax = plt.subplots(figsize=(5, 5))
    extent = [bbox[0][0], bbox[0][1], bbox[1][0], bbox[1][1]]
    layers = [(S, LIGHT)] + ([(Sbar, DARK)] if Sbar is not None else [])
    for region, color in layers:
        R = rasterize(region, bbox, resolution)
        mask = np.ma.masked_where(~R.mask.T, np.ones(R.mask.T.shape))
        ax.imshow(mask, origin="lower", extent=extent, cmap=ListedColormap([color]),
                  interpolation="nearest", aspect="auto")
    for x in points:
        ax.plot(x[0], x[1], "k.", ms=6)
    for curve in trajectories:
        curve = np.asarray(curve)
        ax.plot(curve[:, 0], curve[:, 1], "k-", lw=2)
    ax.set_xlim(extent[:2])
    ax.set_ylim(extent[2:])
    ax.set_xlabel(labels[0])
    ax.set_ylabel(labels[1])
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
