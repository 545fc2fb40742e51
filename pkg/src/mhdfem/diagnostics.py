"""Conserved and balanced functionals of simulation states.

Everything here is a pure read of a state; the heavy piece is the
discrete vector potential, a curl-curl saddle-point solve with a
divergence-free (Coulomb-type) gauge that is factored once per mesh.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import SolverError
from .spaces import FeFunction, _active_numbering, elementwise_div


@dataclass
class DiagnosticsRecord:
    t: float
    mass: float
    energy: float
    cross_helicity: float
    magnetic_helicity: float
    div_b_l2: float
    energy_residual: float
    newton_iters: int

    def __post_init__(self):
        vals = [self.t, self.mass, self.energy, self.cross_helicity,
                self.magnetic_helicity, self.div_b_l2, self.energy_residual]
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("non-finite diagnostic value")
        if self.div_b_l2 < 0:
            raise ValueError("negative divergence norm")


def total_mass(rho):
    return float(rho.space.mesh.cell_volumes @ rho.coeffs)


def div_b_l2(B):
    dv = elementwise_div(B)
    return float(np.sqrt(B.space.mesh.cell_volumes @ dv**2))


def cross_helicity(system, u, B):
    """int u . B_total over the box."""
    if system.inviscid:
        val = float(u.coeffs @ (system.asm.M_rt @ B.coeffs))
    else:
        val = float(u.coeffs @ (system.M_vel_rt @ B.coeffs))
    if system.b0_vel is not None:
        val += float(u.coeffs @ system.b0_vel)
    return val


def gradient_matrix(mesh):
    """Edge-circulation matrix of the gradient: CG1 (zero trace) -> NED0.

    The circulation of grad psi along the edge (a, b), a < b, is
    psi(b) - psi(a); rows/columns follow the interior-entity numbering
    of the two spaces.
    """
    ned_num = _active_numbering(~mesh.boundary_edges)
    cg_num = _active_numbering(~mesh.boundary_vertices)
    rows, cols, vals = [], [], []
    for (a, b), e in zip(mesh.edges, ned_num):
        if e < 0:
            continue
        if cg_num[b] >= 0:
            rows.append(e); cols.append(cg_num[b]); vals.append(1.0)
        if cg_num[a] >= 0:
            rows.append(e); cols.append(cg_num[a]); vals.append(-1.0)
    n_ned = int((~mesh.boundary_edges).sum())
    n_cg = int((~mesh.boundary_vertices).sum())
    return sp.coo_matrix((vals, (rows, cols)), shape=(n_ned, n_cg)).tocsr()


class VectorPotentialSolver:
    """Recover A in NED0 with exact_curl(A) = B and a div-free gauge (3D).

    The saddle system [[D^T M_rt D, M_ned G], [G^T M_ned, 0]] is factored
    once and reused for every state of a run.
    """

    def __init__(self, system):
        if system.mesh.dim != 3:
            raise ValueError("vector potential recovery is three-dimensional")
        self.system = system
        asm = system.asm
        ned = system.ned
        G = gradient_matrix(system.mesh)
        K = (asm.D.T @ asm.M_rt @ asm.D).tocsr()
        C = (ned.mass_matrix() @ G).tocsr()
        n, q = K.shape[0], C.shape[1]
        S = sp.bmat([[K, C], [C.T, None]], format="csc")
        try:
            self._lu = splu(S)
        except RuntimeError as exc:
            raise SolverError(f"saddle-point factorization failed: {exc}") from exc
        self._n = n

    def vector_potential(self, B, div_tol=1e-10):
        nrm = div_b_l2(B)
        if nrm > div_tol:
            raise ValueError(
                f"field is not divergence-free (|div B| = {nrm:.3e})"
            )
        asm = self.system.asm
        rhs = np.zeros(self._lu.shape[0])
        rhs[: self._n] = asm.D.T @ (asm.M_rt @ B.coeffs)
        sol = self._lu.solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise SolverError("saddle-point solve produced non-finite values")
        return FeFunction(self.system.ned, sol[: self._n])

    def magnetic_helicity(self, B):
        A = self.vector_potential(B)
        return float(A.coeffs @ (self.system.asm.M_ned_rt @ B.coeffs))


def magnetic_helicity(system, B):
    """int A . B with curl A = B (3D); one-off convenience wrapper."""
    if system.mesh.dim == 2:
        raise ValueError(
            "magnetic helicity is trivially preserved in two dimensions "
            "(a vector potential orthogonal to the plane); not computed"
        )
    return VectorPotentialSolver(system).magnetic_helicity(B)


def energy_identity_residual(system, state0, state1, dt):
    """Energy rate minus the viscous/resistive dissipation of one step."""
    e0 = system.total_energy(state0)
    e1 = system.total_energy(state1)
    return (e1 - e0) / dt - system.dissipation(state0, state1)


def make_record(system, state, prev_state=None, dt=None, potential_solver=None):
    """Assemble one DiagnosticsRecord; prev_state enables the energy check."""
    if system.mesh.dim == 3 and potential_solver is not None:
        hel = potential_solver.magnetic_helicity(state.B)
    else:
        hel = 0.0
    resid = (
        energy_identity_residual(system, prev_state, state, dt)
        if prev_state is not None
        else 0.0
    )
    return DiagnosticsRecord(
        t=state.t,
        mass=total_mass(state.rho),
        energy=system.total_energy(state),
        cross_helicity=cross_helicity(system, state.u, state.B),
        magnetic_helicity=hel,
        div_b_l2=div_b_l2(state.B),
        energy_residual=resid,
        newton_iters=int(getattr(state, "newton_iters", 0)),
    )
