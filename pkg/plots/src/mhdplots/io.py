"""Readers for the solver's external file formats.

Only the documented formats are consumed: the diagnostics CSV with its
fixed header, and legacy ASCII VTK unstructured-grid snapshots with cell
data.  Nothing here imports the solver.
"""

import numpy as np

CSV_COLUMNS = (
    "t",
    "mass",
    "energy",
    "cross_helicity",
    "magnetic_helicity",
    "div_b_l2",
    "energy_residual",
    "newton_iters",
)


class FormatError(ValueError):
    """Raised when an input file does not match the documented format."""


def read_diagnostics_csv(path):
    """Read a diagnostics CSV into a dict of column arrays.

    Malformed rows raise FormatError naming the offending line number.
    """
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f]
    if not lines:
        raise FormatError(f"{path}: empty file")
    header = lines[0].split(",")
    if tuple(header) != CSV_COLUMNS:
        raise FormatError(
            f"{path}: unexpected header {lines[0]!r}"
        )
    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        if not ln.strip():
            continue
        parts = ln.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise FormatError(
                f"{path}: row {i} has {len(parts)} fields, "
                f"expected {len(CSV_COLUMNS)}: {ln!r}"
            )
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise FormatError(f"{path}: row {i} is not numeric: {ln!r}") from exc
    if not rows:
        raise FormatError(f"{path}: no data rows")
    data = np.array(rows)
    return {name: data[:, j] for j, name in enumerate(CSV_COLUMNS)}


def _expect(condition, path, message):
    if not condition:
        raise FormatError(f"{path}: {message}")


def read_vtk_snapshot(path):
    """Read a legacy ASCII unstructured-grid snapshot.

    Returns a dict with keys: time, points (n,3), cells (m,k), cell_type,
    and one entry per cell-data array (e.g. rho, s, u, B).
    """
    with open(path) as f:
        lines = f.read().split("\n")
    _expect(lines and lines[0].startswith("# vtk DataFile"), path, "not a VTK file")
    title = lines[1] if len(lines) > 1 else ""
    time = None
    for token in title.split():
        if token.startswith("t="):
            try:
                time = float(token[2:])
            except ValueError:
                pass
    _expect(len(lines) > 3 and lines[2] == "ASCII", path, "not an ASCII VTK file")
    _expect(
        lines[3] == "DATASET UNSTRUCTURED_GRID", path, "not an unstructured grid"
    )

    out = {"time": time}
    i = 4
    n_cells = 0
    while i < len(lines):
        ln = lines[i]
        if ln.startswith("POINTS"):
            n = int(ln.split()[1])
            pts = [
                [float(v) for v in lines[i + 1 + j].split()] for j in range(n)
            ]
            out["points"] = np.array(pts)
            i += 1 + n
        elif ln.startswith("CELLS"):
            n_cells = int(ln.split()[1])
            cells = []
            for j in range(n_cells):
                parts = [int(v) for v in lines[i + 1 + j].split()]
                _expect(
                    parts[0] == len(parts) - 1, path, f"bad cell row {i + 2 + j}"
                )
                cells.append(parts[1:])
            out["cells"] = np.array(cells)
            i += 1 + n_cells
        elif ln.startswith("CELL_TYPES"):
            n = int(ln.split()[1])
            types = set(int(lines[i + 1 + j]) for j in range(n))
            _expect(len(types) == 1, path, "mixed cell types")
            out["cell_type"] = types.pop()
            i += 1 + n
        elif ln.startswith("CELL_DATA"):
            _expect(int(ln.split()[1]) == n_cells, path, "CELL_DATA count mismatch")
            i += 1
        elif ln.startswith("SCALARS"):
            name = ln.split()[1]
            _expect(
                lines[i + 1].startswith("LOOKUP_TABLE"), path, "missing lookup table"
            )
            vals = [float(lines[i + 2 + j]) for j in range(n_cells)]
            out[name] = np.array(vals)
            i += 2 + n_cells
        elif ln.startswith("VECTORS"):
            name = ln.split()[1]
            vals = [
                [float(v) for v in lines[i + 1 + j].split()] for j in range(n_cells)
            ]
            out[name] = np.array(vals)
            i += 1 + n_cells
        elif not ln.strip():
            i += 1
        else:
            raise FormatError(f"{path}: unrecognized section at line {i + 1}: {ln!r}")
    _expect("points" in out and "cells" in out, path, "missing geometry")
    _expect("rho" in out, path, "missing density cell data")
    return out
