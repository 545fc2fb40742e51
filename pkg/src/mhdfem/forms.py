"""Trilinear/bilinear forms of the discrete MHD system.

The assembler precomputes per-cell and per-facet tensors once; every
form is then a tensor contraction over coefficient arrays.  All `_apply`
methods accept batched coefficients (trailing axis) so a whole
finite-difference Jacobian can be evaluated in one call.

Conventions
-----------
* jump of a scalar f across a facet: [[f]] = (f1 - f2) n1, average {f} =
  (f1 + f2)/2, with n1 the stored facet normal (cell1 -> cell2);
* jump of a vector q: [[q]] = q1 - q2 (plain difference);
* 2D cross products: vectors u, v -> scalar u_x v_y - u_y v_x; scalar j
  with vector h -> vector (-j h_y, j h_x); n x w -> scalar n_x w_y - n_y w_x.

The upwind coefficients are implemented in cancelled form: the quotient
beta_e(u)/(u.n) is simplified to arctan(u.n / c)/pi analytically, so no
division by u.n ever occurs.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import splu

from .quadrature import interval_rule, simplex_rule
from .spaces import FeFunction, curl_matrix, inner, mixed_mass

DEFAULT_SMOOTHING = 0.01


def _as_batch(x):
    x = np.asarray(x, dtype=float)
    return (x[:, None], True) if x.ndim == 1 else (x, False)


def _lambda_at(mesh, cells, pts):
    """Barycentric coordinates of physical points: (F, nq, d+1)."""
    g = mesh.bary_grads[cells]            # (F, d+1, d)
    p = mesh.cell_coords[cells]           # (F, d+1, d)
    return 1.0 + np.einsum("fid,fqid->fqi", g, pts[:, :, None, :] - p[:, None, :, :])


def _rt_traces(mesh, rt, cells, pts):
    """RT0 basis values of given cells at physical points: (F, nq, d+1, d)."""
    d = mesh.dim
    p = mesh.cell_coords[cells]
    scale = mesh.cell_facet_signs[cells] / (d * mesh.cell_volumes[cells, None])
    return scale[:, None, :, None] * (pts[:, :, None, :] - p[:, None, :, :])


def _cgv_traces(mesh, vel, cells, pts):
    """CG1V basis values at physical points: (F, nq, (d+1)*d, d)."""
    d = mesh.dim
    lam = _lambda_at(mesh, cells, pts)
    F, nq = lam.shape[:2]
    vals = np.zeros((F, nq, (d + 1) * d, d))
    for i in range(d + 1):
        for c in range(d):
            vals[:, :, i * d + c, c] = lam[:, :, i]
    return vals


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _bilinear_apply(T, a_loc, b_loc):
    """r[k,c,m] = sum_ab T[k,a,b,c] a[k,a,m] b[k,b,m], via batched matmul.

    Much faster than a generic einsum for the wide coefficient batches of
    the finite-difference Jacobian.
    """
    k, na, nb, nc = T.shape
    t1 = np.matmul(T.reshape(k, na, nb * nc).transpose(0, 2, 1), a_loc)
    t1 = t1.reshape(k, nb, nc, a_loc.shape[-1])
    return (t1 * b_loc[:, :, None, :]).sum(axis=1)


@dataclass
class AuxChain:
    """The auxiliary curl-space fields of one midpoint state."""

    J: FeFunction
    H: FeFunction
    U: FeFunction
    E: FeFunction
    alpha: FeFunction


class FormAssembler:
    """Precomputed tensors for all forms on one mesh/space configuration.

    Parameters
    ----------
    vel : velocity space (CG1V viscous, RT0 inviscid)
    dg, rt, ned : DG0, RT0, NED0 spaces
    cgs : CG1S space; required in 2D (scalar curl space for J and E)
    """

    def __init__(self, vel, dg, rt, ned, cgs=None, smoothing=DEFAULT_SMOOTHING):
        mesh = vel.mesh
        self.mesh = mesh
        self.vel, self.dg, self.rt, self.ned, self.cgs = vel, dg, rt, ned, cgs
        self.smoothing = smoothing
        d = mesh.dim
        if d == 2 and cgs is None:
            raise ValueError("2D assembler needs the scalar CG space")
        self.je_space = ned if d == 3 else cgs

        # interior facet data
        self.fidx = mesh.interior_facets
        self.fk = mesh.facet_cells[self.fidx]          # (F, 2)
        self.fn = mesh.facet_normals[self.fidx]
        self.fa = mesh.facet_areas[self.fidx]
        nf = len(self.fidx)

        # curl matrix into RT0 and mass factorizations
        self.D = curl_matrix(self.je_space, rt)
        self.M_rt = rt.mass_matrix()
        self._lu_ned = splu(ned.mass_matrix())
        self._lu_je = self._lu_ned if d == 3 else splu(cgs.mass_matrix())

        # mixed pairings
        self.M_vel_ned = mixed_mass(vel, ned)          # <alpha, v>
        self.M_ned_rt = mixed_mass(ned, rt)            # <B, G>
        self.M_ned_vel = mixed_mass(ned, vel)          # <u, V>

        # cross-product tensors on cells
        ref, w = ned.cell_quadrature()
        Nv = ned.tabulate(ref)
        if d == 3:
            cr = np.cross(Nv[:, :, :, None, :], Nv[:, :, None, :, :])
            self.X = np.einsum("kq,kqabd,kqcd->kabc", w, cr, Nv, optimize=True)
        else:
            Sv = cgs.tabulate(ref)[..., 0]             # (nc, nq, 3)
            uxh = _cross2(Nv[:, :, :, None, :], Nv[:, :, None, :, :])
            # <U x H, F> with scalar test F
            self.Xs = np.einsum("kq,kqab,kqc->kabc", w, uxh, Sv, optimize=True)
            # <J x H, beta> = <J, (H x beta)_sc> with scalar J
            hxb = _cross2(Nv[:, :, :, None, :], Nv[:, :, None, :, :])
            self.Xb = np.einsum("kq,kqa,kqbc->kabc", w, Sv, hxb, optimize=True)

        # advection tensor A1[k, w, adv, advected] = int phi_w . (phi_adv . grad) phi_advected
        refv, wv = vel.cell_quadrature()
        V = vel.tabulate(refv)
        Gr = vel.tabulate_grad(refv)
        self.A1 = np.einsum("kq,kqaj,kqbi,kqcji->kabc", wv, V, V, Gr, optimize=True)
        # a(w,u,v) = -int w.(u.grad v - v.grad u); combined tensor so that
        # the apply is a single bilinear contraction in (w, u)
        self.Aeff = self.A1.transpose(0, 1, 3, 2) - self.A1

        self.vol = mesh.cell_volumes
        self.Mloc_vel = vel.local_mass()

        # facet quadrature and velocity traces
        fverts = mesh.vertices[mesh.facet_vertices[self.fidx]]  # (F, d, d)
        if d == 2:
            xi, wf = interval_rule(3)
            pts = fverts[:, None, 0, :] + xi[None, :, None] * (
                fverts[:, 1] - fverts[:, 0]
            )[:, None, :]
            self.fw = wf[None, :] * self.fa[:, None]
        else:
            xi, wf = simplex_rule(2, 3)
            pts = (
                fverts[:, None, 0, :]
                + xi[None, :, 0, None] * (fverts[:, 1] - fverts[:, 0])[:, None, :]
                + xi[None, :, 1, None] * (fverts[:, 2] - fverts[:, 0])[:, None, :]
            )
            self.fw = wf[None, :] * (self.fa[:, None] / 0.5)
        self.fpts = pts

        if vel.family == "RT0":
            # velocity dof on each interior facet (flux w.r.t. the stored normal)
            k1 = self.fk[:, 0]
            locpos = np.argmax(mesh.cell_facets[k1] == self.fidx[:, None], axis=1)
            self.v_facet_dof = vel.cell_dofs[k1, locpos]
            self._build_ah_facet_tensor()
        else:
            Tv = _cgv_traces(mesh, vel, self.fk[:, 0], pts)
            self.Tn = np.einsum("fqad,fd->fqa", Tv, self.fn)  # (F, nq, nloc)
            self.Vn = np.einsum("fq,fqa->fa", self.fw, self.Tn)

        self._visc = {}

    # -- low-level helpers -------------------------------------------------

    def _build_ah_facet_tensor(self):
        """Facet tensor of the DG momentum form, signs for the test side baked in."""
        mesh, rt = self.mesh, self.rt
        d = mesh.dim
        T = [
            _rt_traces(mesh, rt, self.fk[:, s], self.fpts) for s in (0, 1)
        ]  # values (F, nq, d+1, d) per side
        nloc = d + 1
        F = len(self.fidx)
        G = np.empty((F, 2, 2, nloc, nloc, nloc))
        for s in range(2):
            if d == 3:
                nxw = np.cross(self.fn[:, None, None, :], T[s])
            else:
                nxw = _cross2(self.fn[:, None, None, :], T[s])  # scalar
            for t in range(2):
                if d == 3:
                    uxv = np.cross(T[t][:, :, :, None, :], T[t][:, :, None, :, :])
                    G[:, s, t] = np.einsum(
                        "fq,fqad,fqbcd->fabc", self.fw, nxw, uxv, optimize=True
                    )
                else:
                    uxv = _cross2(T[t][:, :, :, None, :], T[t][:, :, None, :, :])
                    G[:, s, t] = np.einsum(
                        "fq,fqa,fqbc->fabc", self.fw, nxw, uxv, optimize=True
                    )
                if t == 1:  # [[u x v]] = (u x v)|_1 - (u x v)|_2
                    G[:, s, t] *= -1.0
        self.G_ah = G

    def _solve_ned(self, rhs):
        return self._lu_ned.solve(rhs)

    def _solve_je(self, rhs):
        return self._lu_je.solve(rhs)

    def arctan_coeff(self, un):
        """(1/pi) arctan(u.n / smoothing); the cancelled upwind coefficient."""
        return np.arctan(un / self.smoothing) / np.pi

    def _facet_flux(self, u):
        """Facet-wise int_e u.n1 ds for a velocity coefficient batch: (F, m)."""
        if self.vel.family == "RT0":
            return u[self.v_facet_dof]
        u_loc = self.vel.gather(u)[self.fk[:, 0]]      # (F, nloc, m)
        return np.einsum("fq,fqa,fam->fm", self.fw, self.Tn, u_loc)

    def _facet_un(self, u):
        """Pointwise u.n at facet quadrature nodes: (F, nq, m) or constant (F, 1, m)."""
        if self.vel.family == "RT0":
            return (u[self.v_facet_dof] / self.fa[:, None])[:, None, :]
        u_loc = self.vel.gather(u)[self.fk[:, 0]]
        return np.einsum("fqa,fam->fqm", self.Tn, u_loc)

    # -- residual-style applications (batched) -----------------------------

    def mom_mass_apply(self, rho, u):
        """<rho u, v> over velocity test functions; rho per cell, batched."""
        loc = np.einsum(
            "kab,km,kbm->kam", self.Mloc_vel, rho, self.vel.gather(u), optimize=True
        )
        return self.vel.scatter(loc)

    def a_apply(self, w_loc, u):
        """a(w, u, .) (volume advection) over velocity tests; w in local coeffs."""
        u_loc = self.vel.gather(u)
        return self.vel.scatter(_bilinear_apply(self.Aeff, w_loc, u_loc))

    def ah_facet_apply(self, u_adv, w_loc, u):
        """Facet part of the DG momentum form over velocity (RT0) tests."""
        un = self._facet_un(u_adv)[:, 0, :]            # constant for RT0
        alpha = self.arctan_coeff(un)                  # (F, m)
        coef = np.stack([0.5 + alpha, 0.5 - alpha], axis=1)  # (F, 2, m)
        w_tr = w_loc[self.fk]                          # (F, 2, nloc, m)
        u_tr = self.vel.gather(u)[self.fk]
        m = w_tr.shape[-1]
        out = np.zeros((self.vel.ndof, m))
        for t in range(2):
            r_t = 0.0
            for s in range(2):
                cw = coef[:, s, None, :] * w_tr[:, s]
                r_t = r_t + _bilinear_apply(self.G_ah[:, s, t], cw, u_tr[:, t])
            dofs = self.vel.cell_dofs[self.fk[:, t]].ravel()
            keep = dofs >= 0
            np.add.at(out, dofs[keep], r_t.reshape(-1, m)[keep])
        return out

    def bh_vel_apply(self, f, g, u_upwind=None):
        """b_h(f, g, .) (+ upwind term) over velocity test functions.

        f, g are DG0 batches (nc, m); u_upwind activates the stabilization.
        """
        k1, k2 = self.fk[:, 0], self.fk[:, 1]
        df = f[k1] - f[k2]
        ag = 0.5 * (g[k1] + g[k2])
        dgj = g[k1] - g[k2]
        if self.vel.family == "RT0":
            c = df * ag
            if u_upwind is not None:
                un = self._facet_un(u_upwind)[:, 0, :]
                c = c + self.arctan_coeff(un) * df * dgj
            out = np.zeros((self.vel.ndof,) + c.shape[1:])
            np.add.at(out, self.v_facet_dof, c)
            return out
        r_loc = self.Vn[:, :, None] * (df * ag)[:, None, :]
        if u_upwind is not None:
            un = self._facet_un(u_upwind)                    # (F, nq, m)
            up = np.einsum(
                "fq,fqm,fqa->fam", self.fw, self.arctan_coeff(un), self.Tn
            )
            r_loc = r_loc + up * (df * dgj)[:, None, :]
        out = np.zeros((self.vel.ndof,) + r_loc.shape[2:])
        dofs = self.vel.cell_dofs[k1]
        keep = dofs.ravel() >= 0
        np.add.at(out, dofs.ravel()[keep], r_loc.reshape(-1, r_loc.shape[-1])[keep])
        return out

    def bh_dg_apply(self, g, u, upwind=False):
        """b_h(., g, u) (+ upwind) over DG0 test functions."""
        k1, k2 = self.fk[:, 0], self.fk[:, 1]
        ag = 0.5 * (g[k1] + g[k2])
        dgj = g[k1] - g[k2]
        flux = self._facet_flux(u)
        c = flux * ag
        if upwind:
            un = self._facet_un(u)
            if self.vel.family == "RT0":
                c = c + self.arctan_coeff(un[:, 0, :]) * flux * dgj
            else:
                iu = np.einsum(
                    "fq,fqm,fqm->fm", self.fw, self.arctan_coeff(un), un
                )
                c = c + iu * dgj
        out = np.zeros((self.dg.ndof,) + c.shape[1:])
        np.add.at(out, k1, c)
        np.add.at(out, k2, -c)
        return out

    def aux_chain_apply(self, B_mid, u_mid, b0_curl=None, b0_ned=None):
        """Batched curl-space auxiliaries of a midpoint state.

        Returns dict of coefficient batches J, H, U, E, alpha.  b0_curl
        and b0_ned are the constant-background contributions <B0, curl K>
        and <B0, G> (1D arrays), present when a background field is used.
        """
        rhsJ = self.D.T @ (self.M_rt @ B_mid)
        if b0_curl is not None:
            rhsJ = rhsJ + b0_curl[:, None]
        J = self._solve_je(rhsJ)
        rhsH = self.M_ned_rt @ B_mid
        if b0_ned is not None:
            rhsH = rhsH + b0_ned[:, None]
        H = self._solve_ned(rhsH)
        U = self._solve_ned(self.M_ned_vel @ u_mid)
        H_loc = self.ned.gather(H)
        U_loc = self.ned.gather(U)
        if self.mesh.dim == 3:
            J_loc = self.ned.gather(J)
            E = self._solve_ned(
                -self.ned.scatter(_bilinear_apply(self.X, U_loc, H_loc))
            )
            alpha = self._solve_ned(
                -self.ned.scatter(_bilinear_apply(self.X, J_loc, H_loc))
            )
        else:
            J_loc = self.cgs.gather(J)
            E = self._solve_je(
                -self.cgs.scatter(_bilinear_apply(self.Xs, U_loc, H_loc))
            )
            alpha = self._solve_ned(
                -self.ned.scatter(_bilinear_apply(self.Xb, J_loc, H_loc))
            )
        return {"J": J, "H": H, "U": U, "E": E, "alpha": alpha}

    def visc_matrices(self):
        """Grad-grad and div-div stiffness matrices of the CG velocity space."""
        if not self._visc:
            import scipy.sparse as sp

            vel = self.vel
            ref, w = vel.cell_quadrature()
            Gr = vel.tabulate_grad(ref)
            loc1 = np.einsum("kq,kqacd,kqbcd->kab", w, Gr, Gr, optimize=True)
            dv = np.einsum("kqacc->kqa", Gr)
            loc2 = np.einsum("kq,kqa,kqb->kab", w, dv, dv, optimize=True)
            nl = vel.nloc
            rows = np.repeat(vel.cell_dofs[:, :, None], nl, axis=2).ravel()
            cols = np.repeat(vel.cell_dofs[:, None, :], nl, axis=1).ravel()
            keep = (rows >= 0) & (cols >= 0)
            shape = (vel.ndof, vel.ndof)
            self._visc["grad"] = sp.coo_matrix(
                (loc1.ravel()[keep], (rows[keep], cols[keep])), shape=shape
            ).tocsr()
            self._visc["div"] = sp.coo_matrix(
                (loc2.ravel()[keep], (rows[keep], cols[keep])), shape=shape
            ).tocsr()
        return self._visc["grad"], self._visc["div"]

    # -- scalar form values ------------------------------------------------

    def form_a(self, w, u, v):
        """a(w,u,v) = -int w . (u.grad v - v.grad u)."""
        w_loc = self.vel.gather(w.coeffs)[:, :, None]
        r = self.a_apply(w_loc, u.coeffs[:, None])
        return float(v.coeffs @ r[:, 0])

    def form_ah(self, u_adv, w, u, v):
        """DG momentum form a_h(u_adv; w, u, v) for RT0 velocities."""
        if self.vel.family != "RT0":
            raise ValueError("a_h requires the inviscid (RT0) velocity space")
        w_loc = self.vel.gather(w.coeffs)[:, :, None]
        r = self.a_apply(w_loc, u.coeffs[:, None])
        r += self.ah_facet_apply(
            u_adv.coeffs[:, None], w_loc, u.coeffs[:, None]
        )
        return float(v.coeffs @ r[:, 0])

    def form_bh(self, f, g, u):
        """b_h(f,g,u); DG0 slots, so only the facet sum survives."""
        r = self.bh_dg_apply(g.coeffs[:, None], u.coeffs[:, None])
        return float(f.coeffs @ r[:, 0])

    def form_bh_upwind(self, u_adv, f, g, v):
        """b~_h(u_adv; f, g, v) in cancelled form."""
        r = self.bh_vel_apply(
            f.coeffs[:, None], g.coeffs[:, None], u_upwind=u_adv.coeffs[:, None]
        )
        return float(v.coeffs @ r[:, 0])

    def form_d(self, u, v, mu, lam):
        """d(u,v) = -int [mu grad u : grad v + (lam+mu) div u div v]."""
        Kg, Kd = self.visc_matrices()
        return float(-v.coeffs @ (mu * (Kg @ u.coeffs) + (lam + mu) * (Kd @ u.coeffs)))

    def form_eh(self, B, C, nu):
        """e_h(B,C) = -nu <curl_h B, curl_h C>."""
        if nu == 0.0:
            return 0.0
        jB = self._solve_je(self.D.T @ (self.M_rt @ B.coeffs))
        rhsC = self.D.T @ (self.M_rt @ C.coeffs)
        return float(-nu * (jB @ rhsC))

    def build_aux_chain(self, B_mid, u_mid, b0_curl=None, b0_ned=None):
        out = self.aux_chain_apply(
            B_mid.coeffs[:, None],
            u_mid.coeffs[:, None],
            b0_curl=b0_curl,
            b0_ned=b0_ned,
        )
        je = self.je_space
        return AuxChain(
            J=FeFunction(je, out["J"][:, 0]),
            H=FeFunction(self.ned, out["H"][:, 0]),
            U=FeFunction(self.ned, out["U"][:, 0]),
            E=FeFunction(je, out["E"][:, 0]),
            alpha=FeFunction(self.ned, out["alpha"][:, 0]),
        )

    def form_ch_direct(self, C, B, u):
        """c_h(C,B,u) = <C, curl pi_curl(pi_curl B x pi_curl u)> (reference route)."""
        Hp = self._solve_ned(self.M_ned_rt @ B.coeffs)
        Up = self._solve_ned(self.M_ned_vel @ u.coeffs)
        H_loc = self.ned.gather(Hp[:, None])
        U_loc = self.ned.gather(Up[:, None])
        if self.mesh.dim == 3:
            rhs = self.ned.scatter(_bilinear_apply(self.X, H_loc, U_loc))
        else:
            rhs = self.cgs.scatter(_bilinear_apply(self.Xs, H_loc, U_loc))
        psi = self._solve_je(rhs)[:, 0]
        curl_psi = FeFunction(self.rt, self.D @ psi)
        return inner(C, curl_psi)
