"""Drift and contour figures from diagnostics files."""

import glob

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from matplotlib.tri import Triangulation

from .io import FormatError, read_diagnostics_csv, read_vtk_snapshot

FLOOR = 1e-20

_DRIFT_COLUMNS = ("mass", "energy", "cross_helicity", "magnetic_helicity")


def plot_drift(csv_path, out_image):
    """Semilog drift figure: |F(t) - F(0)| per functional, plus ||div B||.

    Values below the 1e-20 axis floor are clamped to it so that exactly
    conserved quantities show as a flat line at the bottom.
    """
    data = read_diagnostics_csv(csv_path)
    t = data["t"]
    fig, ax = plt.subplots(figsize=(7, 5))
    for name in _DRIFT_COLUMNS:
        drift = np.maximum(np.abs(data[name] - data[name][0]), FLOOR)
        ax.semilogy(t, drift, label=f"|{name}(t) - {name}(0)|")
    ax.semilogy(
        t, np.maximum(data["div_b_l2"], FLOOR), label="||div B||", linestyle="--"
    )
    ax.set_ylim(bottom=FLOOR)
    ax.set_xlabel("t")
    ax.set_ylabel("absolute deviation")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_image, dpi=150)
    plt.close(fig)
    return out_image


def _snapshot_index(pattern):
    """Map snapshot time -> path for every file matching the glob."""
    paths = sorted(glob.glob(pattern))
    if not paths:
        raise FormatError(f"no files match {pattern!r}")
    index = {}
    for p in paths:
        snap = read_vtk_snapshot(p)
        if snap["time"] is not None:
            index[snap["time"]] = p
    return index


def plot_density_contours(vtk_pattern, times, out_image, time_tol=1e-9):
    """One density panel per requested time, on a shared color scale.

    Requested times with no matching snapshot are reported and skipped.
    Returns (out_image, skipped_times).
    """
    index = _snapshot_index(vtk_pattern)
    available = sorted(index)
    selected, skipped = [], []
    for t in times:
        match = [a for a in available if abs(a - t) <= max(time_tol, 1e-9 * max(1, abs(t)))]
        if match:
            selected.append((t, index[match[0]]))
        else:
            skipped.append(t)
    if skipped:
        print(
            "missing snapshots for times: "
            + ", ".join(f"{t:g}" for t in skipped)
            + " (skipped)"
        )
    if not selected:
        raise FormatError("no requested time has a snapshot")

    snaps = [read_vtk_snapshot(p) for _, p in selected]
    for s, (_, p) in zip(snaps, selected):
        if s["cell_type"] != 5:
            raise FormatError(f"{p}: contour panels need triangle cells")
    vmin = min(float(s["rho"].min()) for s in snaps)
    vmax = max(float(s["rho"].max()) for s in snaps)

    n = len(snaps)
    fig, axes = plt.subplots(
        1, n, figsize=(2.2 * n, 6), squeeze=False, sharey=True
    )
    for ax, (t, _), snap in zip(axes[0], selected, snaps):
        tri = Triangulation(
            snap["points"][:, 0], snap["points"][:, 1], snap["cells"]
        )
        m = ax.tripcolor(tri, snap["rho"], vmin=vmin, vmax=vmax, cmap="viridis")
        ax.set_title(f"t = {t:g}", fontsize=9)
        ax.set_aspect("equal")
    fig.colorbar(m, ax=axes[0], label="density", shrink=0.8)
    fig.savefig(out_image, dpi=150)
    plt.close(fig)
    return out_image, skipped
