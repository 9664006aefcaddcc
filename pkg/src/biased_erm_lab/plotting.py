"""Figure rendering for recovery-region sweeps.

Uses the Agg backend and a pinned SVG hash salt so repeated runs of the same
sweep produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.colors import ListedColormap

from .recovery import RegionSweep, Verdict

_RECOVERS_COLOR = "#2b6cb8"
_FAILS_COLOR = "#c0392b"

_AXIS_LABELS = {
    "r": "group B share r",
    "eta": "label noise eta",
    "beta_pos": "positive retention beta_pos",
    "beta_neg": "negative retention beta_neg",
    "nu": "kept-positive flip rate nu",
}


def save_region_svg(sweep: RegionSweep, path: str) -> None:
    """Raster the verdict grid (blue recovers, red otherwise) with the exact
    condition zero set dashed in black."""
    matplotlib.rcParams["svg.hashsalt"] = "biased-erm-lab"
    recovers = (sweep.verdicts == Verdict.RECOVERS.value).astype(int)

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    try:
        x0, x1 = float(sweep.values1[0]), float(sweep.values1[-1])
        y0, y1 = float(sweep.values2[0]), float(sweep.values2[-1])
        if x1 == x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 == y0:
            y0, y1 = y0 - 0.5, y1 + 0.5
        ax.imshow(
            recovers.T,
            origin="lower",
            extent=(x0, x1, y0, y1),
            aspect="auto",
            cmap=ListedColormap([_FAILS_COLOR, _RECOVERS_COLOR]),
            vmin=0,
            vmax=1,
            interpolation="nearest",
        )
        for _, points in sweep.boundary:
            ax.plot(points[:, 0], points[:, 1], "k--", linewidth=1.5)
        ax.set_xlabel(_AXIS_LABELS.get(sweep.axis1.name, sweep.axis1.name))
        ax.set_ylabel(_AXIS_LABELS.get(sweep.axis2.name, sweep.axis2.name))
        ax.set_title("constrained recovery region")
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
