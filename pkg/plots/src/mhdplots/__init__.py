"""Figure generation for solver diagnostics CSV files and VTK snapshots."""

from .figures import plot_density_contours, plot_drift
from .io import read_diagnostics_csv, read_vtk_snapshot

__all__ = [
    "plot_drift",
    "plot_density_contours",
    "read_diagnostics_csv",
    "read_vtk_snapshot",
]
