"""Lowest-order finite element spaces on simplicial meshes.

Families
--------
CG1V : continuous P1 vectors, zero trace on the boundary (viscous velocity)
CG1S : continuous P1 scalars, zero trace (2D curl-space scalars, gauge multipliers)
DG0  : piecewise constants (density, entropy)
RT0  : lowest Raviart-Thomas, zero normal trace (magnetic field, inviscid velocity)
NED0 : lowest Nedelec of the first kind, zero tangential trace (auxiliary fields)

Degrees of freedom sit on mesh entities; boundary-constrained dofs are
eliminated from the global numbering (cell_dofs stores -1 for them).
Basis functions are tabulated with global orientation signs baked in, so
a coefficient vector combines with tabulated values directly.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .quadrature import simplex_rule
from .errors import ConfigurationError

CELL_QUAD_POINTS = 3  # points per direction; exact to total degree 5


def _active_numbering(mask):
    """Map entity indices to a contiguous numbering; -1 where constrained."""
    num = np.full(len(mask), -1, dtype=np.int64)
    num[mask] = np.arange(int(mask.sum()))
    return num


@dataclass
class FeSpace:
    family: str
    mesh: object
    ncomp: int
    nloc: int
    ndof: int
    cell_dofs: np.ndarray  # (nc, nloc), -1 for eliminated dofs

    def __post_init__(self):
        self._mass = None
        self._mass_lu = None
        self._quad_cache = {}

    # -- tabulation -------------------------------------------------------

    def _lambdas(self, ref_pts):
        """Barycentric coordinates at reference points, shape (nq, d+1)."""
        lam = np.empty((len(ref_pts), self.mesh.dim + 1))
        lam[:, 1:] = ref_pts
        lam[:, 0] = 1.0 - ref_pts.sum(axis=1)
        return lam

    def tabulate(self, ref_pts):
        """Basis values at reference points: (nc, nq, nloc, ncomp).

        Values include orientation signs, i.e. they are the restrictions
        of the global basis functions.
        """
        mesh = self.mesh
        nc, d = mesh.num_cells, mesh.dim
        nq = len(ref_pts)
        lam = self._lambdas(ref_pts)
        if self.family == "DG0":
            return np.ones((nc, nq, 1, 1))
        if self.family == "CG1S":
            vals = np.broadcast_to(lam[None, :, :, None], (nc, nq, d + 1, 1))
            return np.ascontiguousarray(vals)
        if self.family == "CG1V":
            vals = np.zeros((nc, nq, (d + 1) * d, d))
            for i in range(d + 1):
                for c in range(d):
                    vals[:, :, i * d + c, c] = lam[None, :, i]
            return vals
        if self.family == "RT0":
            coords = mesh.cell_coords                      # (nc, d+1, d)
            phys = np.einsum("qi,kid->kqd", lam, coords)   # quad pts, physical
            vals = np.empty((nc, nq, d + 1, d))
            scale = (
                mesh.cell_facet_signs / (d * mesh.cell_volumes[:, None])
            )  # (nc, d+1)
            for i in range(d + 1):
                vals[:, :, i, :] = (
                    scale[:, None, i, None] * (phys - coords[:, None, i, :])
                )
            return vals
        if self.family == "NED0":
            la, lb = self._edge_local_pairs()
            g = mesh.bary_grads                            # (nc, d+1, d)
            nl = self.nloc
            vals = np.empty((nc, nq, nl, d))
            for m in range(nl):
                ga = np.take_along_axis(g, la[:, m, None, None], axis=1)[:, 0]
                gb = np.take_along_axis(g, lb[:, m, None, None], axis=1)[:, 0]
                la_v = lam[:, la[:, m]].T  # (nc, nq)
                lb_v = lam[:, lb[:, m]].T
                vals[:, :, m, :] = (
                    la_v[:, :, None] * gb[:, None, :]
                    - lb_v[:, :, None] * ga[:, None, :]
                )
            return vals
        raise ConfigurationError(f"unknown family {self.family}")

    def tabulate_grad(self, ref_pts):
        """Component gradients, (nc, nq, nloc, ncomp, d).  CG1V/RT0 only."""
        mesh = self.mesh
        nc, d = mesh.num_cells, mesh.dim
        nq = len(ref_pts)
        if self.family == "CG1V":
            g = mesh.bary_grads
            out = np.zeros((nc, nq, (d + 1) * d, d, d))
            for i in range(d + 1):
                for c in range(d):
                    out[:, :, i * d + c, c, :] = g[:, None, i, :]
            return out
        if self.family == "RT0":
            scale = self.mesh.cell_facet_signs / (d * mesh.cell_volumes[:, None])
            eye = np.eye(d)
            out = np.empty((nc, nq, d + 1, d, d))
            out[:] = scale[:, None, :, None, None] * eye[None, None, None]
            return out
        raise ConfigurationError(f"no gradients for family {self.family}")

    def _edge_local_pairs(self):
        """Local vertex indices (low, high by global number) of each local edge."""
        mesh = self.mesh
        cells = mesh.cells
        if mesh.dim == 3:
            pairs = list(combinations(range(4), 2))
        else:
            # 2D: local edge m is the facet opposite local vertex m
            pairs = [(1, 2), (0, 2), (0, 1)]
        la = np.empty((mesh.num_cells, len(pairs)), dtype=np.int64)
        lb = np.empty_like(la)
        for m, (i, j) in enumerate(pairs):
            gi, gj = cells[:, i], cells[:, j]
            swap = gi > gj
            la[:, m] = np.where(swap, j, i)
            lb[:, m] = np.where(swap, i, j)
        return la, lb

    # -- quadrature helpers ----------------------------------------------

    def cell_quadrature(self):
        """(ref_pts, phys_weights) with weights of shape (nc, nq)."""
        key = "cell"
        if key not in self._quad_cache:
            ref, wref = simplex_rule(self.mesh.dim, CELL_QUAD_POINTS)
            refvol = 1.0 / (2.0 if self.mesh.dim == 2 else 6.0)
            w = wref[None, :] * (self.mesh.cell_volumes[:, None] / refvol)
            self._quad_cache[key] = (ref, w)
        return self._quad_cache[key]

    # -- algebra ----------------------------------------------------------

    def gather(self, coeffs):
        """Per-cell local coefficients: (nc, nloc) or (nc, nloc, m).

        Eliminated (-1) dofs contribute zero.
        """
        coeffs = np.asarray(coeffs)
        padded = np.concatenate(
            [coeffs, np.zeros((1,) + coeffs.shape[1:])], axis=0
        )
        return padded[self.cell_dofs]

    def scatter(self, local):
        """Accumulate per-cell local contributions into a global vector."""
        shape = (self.ndof,) + local.shape[2:]
        out = np.zeros(shape)
        flat_dofs = self.cell_dofs.ravel()
        keep = flat_dofs >= 0
        np.add.at(out, flat_dofs[keep], local.reshape((-1,) + local.shape[2:])[keep])
        return out

    def local_mass(self):
        """Per-cell local mass matrices, (nc, nloc, nloc)."""
        key = "local_mass"
        if key not in self._quad_cache:
            ref, w = self.cell_quadrature()
            vals = self.tabulate(ref)
            self._quad_cache[key] = np.einsum(
                "kq,kqac,kqbc->kab", w, vals, vals, optimize=True
            )
        return self._quad_cache[key]

    def mass_matrix(self):
        if self._mass is None:
            loc = self.local_mass()
            nc, nl = loc.shape[:2]
            rows = np.repeat(self.cell_dofs[:, :, None], nl, axis=2).ravel()
            cols = np.repeat(self.cell_dofs[:, None, :], nl, axis=1).ravel()
            keep = (rows >= 0) & (cols >= 0)
            M = sp.coo_matrix(
                (loc.ravel()[keep], (rows[keep], cols[keep])),
                shape=(self.ndof, self.ndof),
            ).tocsc()
            self._mass = M
        return self._mass

    def mass_solve(self, rhs):
        if self._mass_lu is None:
            self._mass_lu = splu(self.mass_matrix())
        return self._mass_lu.solve(np.asarray(rhs))


def mixed_mass(row_space, col_space):
    """Sparse matrix of <phi_row, phi_col> pairings on a shared mesh."""
    assert row_space.mesh is col_space.mesh
    assert row_space.ncomp == col_space.ncomp
    ref, w = row_space.cell_quadrature()
    vr = row_space.tabulate(ref)
    vc = col_space.tabulate(ref)
    loc = np.einsum("kq,kqac,kqbc->kab", w, vr, vc, optimize=True)
    nc = row_space.mesh.num_cells
    nlr, nlc = row_space.nloc, col_space.nloc
    rows = np.repeat(row_space.cell_dofs[:, :, None], nlc, axis=2).ravel()
    cols = np.repeat(col_space.cell_dofs[:, None, :], nlr, axis=1).ravel()
    keep = (rows >= 0) & (cols >= 0)
    return sp.coo_matrix(
        (loc.ravel()[keep], (rows[keep], cols[keep])),
        shape=(row_space.ndof, col_space.ndof),
    ).tocsr()


# -- space constructors ---------------------------------------------------


def make_space(family, mesh):
    if family == "DG0":
        cell_dofs = np.arange(mesh.num_cells, dtype=np.int64)[:, None]
        return FeSpace("DG0", mesh, 1, 1, mesh.num_cells, cell_dofs)
    if family in ("CG1S", "CG1V"):
        num = _active_numbering(~mesh.boundary_vertices)
        vdofs = num[mesh.cells]  # (nc, d+1)
        nactive = int((~mesh.boundary_vertices).sum())
        if family == "CG1S":
            return FeSpace("CG1S", mesh, 1, mesh.dim + 1, nactive, vdofs)
        d = mesh.dim
        cell_dofs = np.full((mesh.num_cells, (d + 1) * d), -1, dtype=np.int64)
        for i in range(d + 1):
            for c in range(d):
                ok = vdofs[:, i] >= 0
                cell_dofs[ok, i * d + c] = vdofs[ok, i] * d + c
        return FeSpace("CG1V", mesh, d, (d + 1) * d, nactive * d, cell_dofs)
    if family == "RT0":
        interior = np.zeros(len(mesh.facet_vertices), dtype=bool)
        interior[mesh.interior_facets] = True
        num = _active_numbering(interior)
        cell_dofs = num[mesh.cell_facets]
        return FeSpace(
            "RT0", mesh, mesh.dim, mesh.dim + 1, int(interior.sum()), cell_dofs
        )
    if family == "NED0":
        if mesh.dim == 3:
            num = _active_numbering(~mesh.boundary_edges)
            cell_dofs = num[mesh.cell_edges]
            return FeSpace("NED0", mesh, 3, 6, int((~mesh.boundary_edges).sum()), cell_dofs)
        interior = np.zeros(len(mesh.facet_vertices), dtype=bool)
        interior[mesh.interior_facets] = True
        num = _active_numbering(interior)
        cell_dofs = num[mesh.cell_facets]
        return FeSpace("NED0", mesh, 2, 3, int(interior.sum()), cell_dofs)
    raise ConfigurationError(f"unknown family {family}")


@dataclass
class FeFunction:
    space: FeSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape[0] != self.space.ndof:
            raise ConfigurationError(
                f"coefficient length {self.coeffs.shape[0]} != ndof {self.space.ndof}"
            )
        if not np.all(np.isfinite(self.coeffs)):
            raise ConfigurationError("non-finite coefficients")

    def copy(self):
        return FeFunction(self.space, self.coeffs.copy())


def l2_project(space, f):
    """L2-orthogonal projection of a callable field onto `space`.

    `f` maps an (npts, dim) array of physical points to values of shape
    (npts,) for scalar families or (npts, ncomp) for vector families.
    """
    ref, w = space.cell_quadrature()
    lam = space._lambdas(ref)
    phys = np.einsum("qi,kid->kqd", lam, space.mesh.cell_coords)
    fv = np.asarray(f(phys.reshape(-1, space.mesh.dim)), dtype=float)
    if not np.all(np.isfinite(fv)):
        raise ConfigurationError("field evaluates to non-finite values")
    fv = fv.reshape(phys.shape[0], phys.shape[1], space.ncomp)
    vals = space.tabulate(ref)
    local = np.einsum("kq,kqac,kqc->ka", w, vals, fv, optimize=True)
    rhs = space.scatter(local[:, :, None])[:, 0]
    return FeFunction(space, space.mass_solve(rhs))


def inner(fa, fb):
    """L2 inner product of two FeFunctions on the same mesh.

    The families may differ (e.g. NED0 against RT0) as long as the
    component counts match; integration is quadrature-exact.
    """
    sa, sb = fa.space, fb.space
    assert sa.mesh is sb.mesh and sa.ncomp == sb.ncomp
    ref, w = sa.cell_quadrature()
    va = np.einsum("kqac,ka->kqc", sa.tabulate(ref), sa.gather(fa.coeffs))
    vb = np.einsum("kqac,ka->kqc", sb.tabulate(ref), sb.gather(fb.coeffs))
    return float(np.einsum("kq,kqc,kqc->", w, va, vb))


def eval_cells(func, cells, ref_pts):
    """Evaluate an FeFunction on given cells at shared reference points.

    Returns (len(cells), nq, ncomp).
    """
    space = func.space
    vals = space.tabulate(ref_pts)[cells]
    loc = space.gather(func.coeffs)[cells]
    return np.einsum("kqac,ka->kqc", vals, loc)


def evaluate(func, cell, bary_point):
    """Value of `func` at a barycentric point of one cell."""
    bary = np.asarray(bary_point, dtype=float)
    if bary.min() < -1e-12 or bary.sum() > 1 + 1e-12:
        raise ConfigurationError("point outside reference simplex")
    ref = bary[1:][None, :] if len(bary) == func.space.mesh.dim + 1 else bary[None, :]
    return eval_cells(func, np.array([cell]), ref)[0, 0]


# -- discrete curl operators ----------------------------------------------


def curl_matrix(curl_space, rt_space):
    """Sparse matrix taking curl-space coefficients to exact RT0 coefficients.

    In 3D the curl space is NED0; in 2D it is the scalar CG1S space with
    curl psi = (d_y psi, -d_x psi).  The image lies in RT0 exactly, so the
    matrix entries are facet fluxes of the (piecewise constant) curls.
    """
    mesh = curl_space.mesh
    d = mesh.dim
    rows, cols, vals = [], [], []
    g = mesh.bary_grads
    if d == 3:
        la, lb = curl_space._edge_local_pairs()
        # constant curl of each local edge basis function per cell
        ga = np.take_along_axis(g, la[:, :, None], axis=1)
        gb = np.take_along_axis(g, lb[:, :, None], axis=1)
        curls = 2.0 * np.cross(ga, gb)  # (nc, 6, 3)
        src_dofs = curl_space.cell_dofs  # (nc, 6)
        nsrc = 6
    else:
        curls = np.stack([g[:, :, 1], -g[:, :, 0]], axis=2)  # (nc, 3, 2)
        src_dofs = curl_space.cell_dofs  # vertices
        nsrc = d + 1

    # flux of each curl through each facet, computed from the first
    # adjacent cell (normal traces agree from both sides)
    fidx = mesh.interior_facets
    k0 = mesh.facet_cells[fidx, 0]
    normals = mesh.facet_normals[fidx]
    areas = mesh.facet_areas[fidx]
    # local facet position within cell k0
    locpos = np.argmax(mesh.cell_facets[k0] == fidx[:, None], axis=1)
    rt_rows = rt_space.cell_dofs[k0, locpos]  # active by construction
    flux = np.einsum("fsd,fd->fs", curls[k0], normals) * areas[:, None]
    for s in range(nsrc):
        c = src_dofs[k0, s]
        keep = c >= 0
        rows.append(rt_rows[keep])
        cols.append(c[keep])
        vals.append(flux[keep, s])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sp.coo_matrix(
        (vals, (rows, cols)), shape=(rt_space.ndof, curl_space.ndof)
    ).tocsr()


def exact_curl(func, rt_space, D=None):
    """Exact curl of a curl-space function as an RT0 function."""
    if D is None:
        D = curl_matrix(func.space, rt_space)
    return FeFunction(rt_space, D @ func.coeffs)


def weak_curl(func, curl_space, D=None):
    """Adjoint curl: <weak_curl(B), k> = <B, curl k> for all k."""
    rt_space = func.space
    if D is None:
        D = curl_matrix(curl_space, rt_space)
    rhs = D.T @ (rt_space.mass_matrix() @ func.coeffs)
    return FeFunction(curl_space, curl_space.mass_solve(rhs))


def elementwise_div(func):
    """Per-cell divergence of an RT0 function (constant on each cell)."""
    space = func.space
    mesh = space.mesh
    loc = space.gather(func.coeffs)
    signs = mesh.cell_facet_signs
    return (loc * signs).sum(axis=1) / mesh.cell_volumes
