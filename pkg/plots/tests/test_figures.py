import numpy as np
import pytest

from mhdplots.cli import main
from mhdplots.figures import plot_density_contours, plot_drift
from mhdplots.io import FormatError

from test_io import HEADER, write_csv, write_vtk


def test_plot_drift_constant_columns(tmp_path):
    path = tmp_path / "d.csv"
    write_csv(path, [[0.01 * k, 16.0, 29.2, 0.1, 9e-6, 0.0, 0.0, 10] for k in range(5)])
    out = tmp_path / "drift.png"
    plot_drift(path, out)
    assert out.exists() and out.stat().st_size > 0


def test_plot_drift_linear_drift(tmp_path):
    path = tmp_path / "d.csv"
    rows = [
        [0.01 * k, 16.0, 29.2 + 1e-6 * 0.01 * k, 0.1, 9e-6, 1e-15, 0.0, 10]
        for k in range(20)
    ]
    write_csv(path, rows)
    out = tmp_path / "drift.png"
    plot_drift(path, out)
    assert out.exists() and out.stat().st_size > 0


def test_plot_contours_single_and_multiple(tmp_path, capsys):
    for k, t in enumerate((0.0, 1.0, 2.0)):
        write_vtk(tmp_path / f"snapshot_{k:04d}.vtk", t=t, rho=(1.0 + t, 2.0))
    out = tmp_path / "panels.png"
    _, skipped = plot_density_contours(
        str(tmp_path / "snapshot_*.vtk"), [0.0, 1.0, 2.0], out
    )
    assert out.exists() and out.stat().st_size > 0
    assert skipped == []
    # single panel
    out1 = tmp_path / "one.png"
    _, skipped = plot_density_contours(str(tmp_path / "snapshot_0000.vtk"), [0.0], out1)
    assert out1.exists()
    assert skipped == []


def test_plot_contours_missing_times_skipped(tmp_path, capsys):
    write_vtk(tmp_path / "snapshot_0000.vtk", t=0.0)
    out = tmp_path / "panels.png"
    _, skipped = plot_density_contours(
        str(tmp_path / "snapshot_*.vtk"), [0.0, 3.0], out
    )
    assert skipped == [3.0]
    assert "missing snapshots" in capsys.readouterr().out
    with pytest.raises(FormatError, match="no requested time"):
        plot_density_contours(str(tmp_path / "snapshot_*.vtk"), [9.0], out)
    with pytest.raises(FormatError, match="no files match"):
        plot_density_contours(str(tmp_path / "nope_*.vtk"), [0.0], out)


def test_cli_verbs(tmp_path, capsys):
    csv = tmp_path / "d.csv"
    write_csv(csv, [[0.0, 1, 2, 3, 4, 0, 0, 0], [0.1, 1, 2, 3, 4, 0, 0, 0]])
    out = tmp_path / "a.png"
    assert main(["drift", str(csv), "-o", str(out)]) == 0
    assert out.exists()
    write_vtk(tmp_path / "s_0000.vtk", t=0.0)
    out2 = tmp_path / "b.png"
    assert main(
        ["contours", str(tmp_path / "s_*.vtk"), "--times", "0", "-o", str(out2)]
    ) == 0
    assert out2.exists()
    # malformed csv -> exit 2 with the offending row named
    bad = tmp_path / "bad.csv"
    bad.write_text(HEADER + "\n1,2\n")
    assert main(["drift", str(bad), "-o", str(tmp_path / "c.png")]) == 2
    assert "row 2" in capsys.readouterr().err
