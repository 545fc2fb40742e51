import numpy as np
import pytest

from mhdplots.io import FormatError, read_diagnostics_csv, read_vtk_snapshot

HEADER = (
    "t,mass,energy,cross_helicity,magnetic_helicity,"
    "div_b_l2,energy_residual,newton_iters"
)


def write_csv(path, rows):
    with open(path, "w") as f:
        f.write(HEADER + "\n")
        for r in rows:
            f.write(",".join(str(v) for v in r) + "\n")


def test_read_csv_round_trip(tmp_path):
    path = tmp_path / "d.csv"
    rows = [
        [0.0, 16.0, 29.2, 1e-7, 9e-6, 3e-15, 0.0, 0],
        [0.005, 16.0, 29.2, 1.1e-7, 9e-6, 2e-15, 1e-10, 12],
    ]
    write_csv(path, rows)
    data = read_diagnostics_csv(path)
    assert np.array_equal(data["t"], [0.0, 0.005])
    assert data["newton_iters"][1] == 12
    assert data["div_b_l2"][0] == 3e-15


def test_read_csv_errors_name_the_row(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text(HEADER + "\n0,1,2,3,4,5,6,7\n0,1,2\n")
    with pytest.raises(FormatError, match="row 3"):
        read_diagnostics_csv(path)
    path.write_text(HEADER + "\n0,1,2,three,4,5,6,7\n")
    with pytest.raises(FormatError, match="row 2"):
        read_diagnostics_csv(path)
    path.write_text("t,mass\n0,1\n")
    with pytest.raises(FormatError, match="header"):
        read_diagnostics_csv(path)
    path.write_text(HEADER + "\n")
    with pytest.raises(FormatError, match="no data rows"):
        read_diagnostics_csv(path)


def write_vtk(path, t=0.5, rho=(1.0, 2.0)):
    """Two triangles on the unit square, cell data rho/u/B."""
    nc = len(rho)
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write(f"simulation state t={t}\n")
        f.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        f.write("POINTS 4 double\n")
        f.write("0 0 0\n1 0 0\n1 1 0\n0 1 0\n")
        f.write(f"CELLS {nc} {nc * 4}\n3 0 1 2\n3 0 2 3\n")
        f.write(f"CELL_TYPES {nc}\n" + "\n".join(["5"] * nc) + "\n")
        f.write(f"CELL_DATA {nc}\n")
        f.write("SCALARS rho double 1\nLOOKUP_TABLE default\n")
        f.write("\n".join(str(v) for v in rho) + "\n")
        f.write("VECTORS u double\n" + "\n".join(["0 0 0"] * nc) + "\n")
        f.write("VECTORS B double\n" + "\n".join(["0.4 0 0"] * nc) + "\n")


def test_read_vtk_snapshot(tmp_path):
    path = tmp_path / "s.vtk"
    write_vtk(path, t=1.25, rho=(1.5, 1.7))
    snap = read_vtk_snapshot(path)
    assert snap["time"] == 1.25
    assert snap["points"].shape == (4, 3)
    assert snap["cells"].shape == (2, 3)
    assert snap["cell_type"] == 5
    assert np.array_equal(snap["rho"], [1.5, 1.7])
    assert snap["B"].shape == (2, 3)
    assert np.allclose(snap["B"][:, 0], 0.4)


def test_read_vtk_rejects_malformed(tmp_path):
    path = tmp_path / "bad.vtk"
    path.write_text("not a vtk file\n")
    with pytest.raises(FormatError, match="not a VTK file"):
        read_vtk_snapshot(path)
    path.write_text(
        "# vtk DataFile Version 3.0\ntitle\nBINARY\nDATASET UNSTRUCTURED_GRID\n"
    )
    with pytest.raises(FormatError, match="ASCII"):
        read_vtk_snapshot(path)
