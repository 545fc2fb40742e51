"""Structured simplicial meshes of boxes in 2D and 3D.

2D boxes are split into two triangles per grid square (fixed diagonal);
3D boxes into six tetrahedra per grid cube (Kuhn subdivision).  Facets
carry a global unit normal pointing from the lower-index adjacent cell
to the higher-index one (outward on the boundary), which fixes the sign
conventions for jumps and for H(div)/H(curl) degrees of freedom.
"""

from dataclasses import dataclass, field
from itertools import combinations, permutations

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class Mesh:
    dim: int
    vertices: np.ndarray          # (nv, dim)
    cells: np.ndarray             # (nc, dim+1), positively oriented
    facet_vertices: np.ndarray    # (nf, dim), sorted vertex indices
    facet_cells: np.ndarray       # (nf, 2), second entry -1 on boundary
    facet_normals: np.ndarray     # (nf, dim), unit, cell0 -> cell1
    facet_areas: np.ndarray       # (nf,)
    interior_facets: np.ndarray   # indices into facet arrays
    boundary_facets: np.ndarray
    cell_facets: np.ndarray       # (nc, dim+1), facet opposite local vertex
    cell_facet_signs: np.ndarray  # (nc, dim+1), +1 if global normal is outward
    cell_volumes: np.ndarray      # (nc,)
    bary_grads: np.ndarray        # (nc, dim+1, dim), gradients of barycentric coords
    boundary_vertices: np.ndarray  # bool mask (nv,)
    edges: np.ndarray = field(default=None)       # (ne, 2), 3D only, low->high
    cell_edges: np.ndarray = field(default=None)  # (nc, 6), 3D only
    boundary_edges: np.ndarray = field(default=None)  # bool mask (ne,), 3D only

    @property
    def num_cells(self):
        return len(self.cells)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def cell_coords(self):
        """Vertex coordinates per cell, shape (nc, dim+1, dim)."""
        return self.vertices[self.cells]

    @property
    def max_diameter(self):
        coords = self.cell_coords
        h = 0.0
        for i, j in combinations(range(self.dim + 1), 2):
            d = np.linalg.norm(coords[:, i] - coords[:, j], axis=1).max()
            h = max(h, d)
        return h


def _cell_geometry(vertices, cells, dim):
    coords = vertices[cells]                      # (nc, d+1, d)
    jac = coords[:, 1:] - coords[:, :1]           # rows: edge vectors
    det = np.linalg.det(jac)
    volumes = det / (2.0 if dim == 2 else 6.0)
    # gradients of barycentric coordinates: rows 1..d of inv(jac)^T,
    # row 0 follows from the partition of unity.
    inv = np.linalg.inv(jac)                      # (nc, d, d)
    grads = np.empty((len(cells), dim + 1, dim))
    grads[:, 1:] = np.swapaxes(inv, 1, 2)
    grads[:, 0] = -grads[:, 1:].sum(axis=1)
    return volumes, grads


def _build_connectivity(dim, vertices, cells):
    nc = len(cells)
    volumes, grads = _cell_geometry(vertices, cells, dim)
    if np.any(volumes <= 0):
        raise ConfigurationError("mesh has non-positively oriented cells")

    # enumerate facets: the (d-1)-face opposite local vertex i
    facet_map = {}
    local_facets = [
        tuple(j for j in range(dim + 1) if j != i) for i in range(dim + 1)
    ]
    for k in range(nc):
        for loc in local_facets:
            key = tuple(sorted(cells[k][list(loc)]))
            facet_map.setdefault(key, []).append(k)

    keys = sorted(facet_map.keys())
    nf = len(keys)
    facet_vertices = np.array(keys, dtype=np.int64)
    facet_cells = np.full((nf, 2), -1, dtype=np.int64)
    for f, key in enumerate(keys):
        adj = sorted(facet_map[key])
        if len(adj) > 2:
            raise ConfigurationError("facet shared by more than two cells")
        facet_cells[f, : len(adj)] = adj

    facet_index = {key: f for f, key in enumerate(keys)}
    cell_facets = np.empty((nc, dim + 1), dtype=np.int64)
    for k in range(nc):
        for i, loc in enumerate(local_facets):
            cell_facets[k, i] = facet_index[tuple(sorted(cells[k][list(loc)]))]

    # geometry: area and outward normal w.r.t. the first adjacent cell
    facet_normals = np.empty((nf, dim))
    facet_areas = np.empty(nf)
    coords = vertices[facet_vertices]             # (nf, d, d)
    if dim == 2:
        tang = coords[:, 1] - coords[:, 0]
        facet_areas[:] = np.linalg.norm(tang, axis=1)
        n = np.stack([tang[:, 1], -tang[:, 0]], axis=1)
    else:
        t1 = coords[:, 1] - coords[:, 0]
        t2 = coords[:, 2] - coords[:, 0]
        n = np.cross(t1, t2)
        facet_areas[:] = 0.5 * np.linalg.norm(n, axis=1)
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    # orient away from the centroid of the first adjacent cell
    first = facet_cells[:, 0]
    cent_cell = vertices[cells[first]].mean(axis=1)
    cent_facet = coords.mean(axis=1)
    flip = np.einsum("fd,fd->f", n, cent_facet - cent_cell) < 0
    n[flip] *= -1.0
    facet_normals[:] = n

    # per-cell facet signs: +1 when the stored normal is outward
    cell_facet_signs = np.where(
        facet_cells[cell_facets, 0] == np.arange(nc)[:, None], 1, -1
    ).astype(np.int64)

    interior = np.flatnonzero(facet_cells[:, 1] >= 0)
    boundary = np.flatnonzero(facet_cells[:, 1] < 0)
    boundary_vertices = np.zeros(len(vertices), dtype=bool)
    boundary_vertices[facet_vertices[boundary].ravel()] = True

    edges = cell_edges = boundary_edges = None
    if dim == 3:
        edge_set = set()
        local_edges = list(combinations(range(4), 2))
        for k in range(nc):
            for i, j in local_edges:
                a, b = cells[k][i], cells[k][j]
                edge_set.add((min(a, b), max(a, b)))
        edges = np.array(sorted(edge_set), dtype=np.int64)
        edge_index = {tuple(e): i for i, e in enumerate(edges)}
        cell_edges = np.empty((nc, 6), dtype=np.int64)
        for k in range(nc):
            for m, (i, j) in enumerate(local_edges):
                a, b = cells[k][i], cells[k][j]
                cell_edges[k, m] = edge_index[(min(a, b), max(a, b))]
        boundary_edges = np.zeros(len(edges), dtype=bool)
        bset = set()
        for f in boundary:
            for i, j in combinations(range(3), 2):
                a, b = facet_vertices[f][i], facet_vertices[f][j]
                bset.add((min(a, b), max(a, b)))
        for e in bset:
            boundary_edges[edge_index[e]] = True

    return Mesh(
        dim=dim,
        vertices=vertices,
        cells=cells,
        facet_vertices=facet_vertices,
        facet_cells=facet_cells,
        facet_normals=facet_normals,
        facet_areas=facet_areas,
        interior_facets=interior,
        boundary_facets=boundary,
        cell_facets=cell_facets,
        cell_facet_signs=cell_facet_signs,
        cell_volumes=volumes,
        bary_grads=grads,
        boundary_vertices=boundary_vertices,
        edges=edges,
        cell_edges=cell_edges,
        boundary_edges=boundary_edges,
    )


def build_structured_mesh(dim, divisions, bounds):
    """Uniform simplicial mesh of a box.

    Parameters
    ----------
    dim : 2 or 3
    divisions : sequence of ints, grid cells per axis
    bounds : sequence of (lo, hi) per axis
    """
    divisions = tuple(int(n) for n in np.atleast_1d(divisions))
    if len(divisions) == 1:
        divisions = divisions * dim
    if dim not in (2, 3) or len(divisions) != dim:
        raise ConfigurationError(f"bad dim/divisions: {dim}, {divisions}")
    if any(n < 1 for n in divisions):
        raise ConfigurationError("divisions must be >= 1 per axis")
    bounds = [(float(a), float(b)) for a, b in bounds]
    if len(bounds) != dim or any(b <= a for a, b in bounds):
        raise ConfigurationError("bounds must be non-degenerate per axis")

    axes = [np.linspace(a, b, n + 1) for (a, b), n in zip(bounds, divisions)]
    if dim == 2:
        nx, ny = divisions
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        vertices = np.stack([X.ravel(), Y.ravel()], axis=1)

        def vid(i, j):
            return i * (ny + 1) + j

        cells = []
        for i in range(nx):
            for j in range(ny):
                v00, v10 = vid(i, j), vid(i + 1, j)
                v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
                cells.append((v00, v10, v11))
                cells.append((v00, v11, v01))
    else:
        nx, ny, nz = divisions
        X, Y, Z = np.meshgrid(axes[0], axes[1], axes[2], indexing="ij")
        vertices = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

        def vid(i, j, k):
            return (i * (ny + 1) + j) * (nz + 1) + k

        unit = np.eye(3, dtype=np.int64)
        cells = []
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    base = np.array([i, j, k])
                    for perm in permutations(range(3)):
                        path = [base]
                        for ax in perm:
                            path.append(path[-1] + unit[ax])
                        tet = [vid(*p) for p in path]
                        # even permutations are positively oriented
                        parity = (
                            sum(
                                1
                                for a, b in combinations(range(3), 2)
                                if perm[a] > perm[b]
                            )
                            % 2
                        )
                        if parity:
                            tet[2], tet[3] = tet[3], tet[2]
                        cells.append(tuple(tet))

    cells = np.array(cells, dtype=np.int64)
    return _build_connectivity(dim, vertices, cells)


def interior_facets(mesh):
    """Enumerate interior facets as (facet, cell+, cell-, normal, measure).

    Deterministic: facets are sorted by their vertex index tuples.
    """
    out = []
    for f in mesh.interior_facets:
        k1, k2 = mesh.facet_cells[f]
        out.append((f, int(k1), int(k2), mesh.facet_normals[f], mesh.facet_areas[f]))
    return out
