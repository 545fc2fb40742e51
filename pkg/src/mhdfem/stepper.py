"""Implicit midpoint time integrator for the discrete MHD system.

Three variants:

* barotropic_viscous  : CG1 velocity (no-slip), volume advection form,
  viscous and resistive terms;
* barotropic_inviscid : RT0 velocity (slip), DG momentum advection with
  upwinded facet terms;
* full_entropy        : barotropic_viscous plus an advected entropy
  density and gravity, with the two averaged difference quotients
  replacing the single one.

Each step solves the coupled nonlinear system with a damped Newton
iteration on a residual that is evaluated in fully vectorized (and
batched) form, so the finite-difference Jacobian costs one batched call.
"""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import eos as eos_mod
from .errors import ConfigurationError, NewtonError
from .forms import FormAssembler
from .linalg import NewtonSettings, newton_solve
from .mesh import build_structured_mesh
from .spaces import FeFunction, elementwise_div, make_space, mixed_mass

VARIANTS = ("barotropic_viscous", "barotropic_inviscid", "full_entropy")


@dataclass
class State:
    t: float
    u: FeFunction
    rho: FeFunction
    B: FeFunction
    s: Optional[FeFunction] = None


@dataclass
class SimConfig:
    variant: str = "barotropic_inviscid"
    # physics
    mu: float = 0.0
    lam: float = 0.0
    nu: float = 0.0
    eos_type: str = "polytropic"   # or "ideal_gas"
    K: float = 1.0
    gamma: float = 5.0 / 3.0
    C_v: float = 1.0
    phi: Optional[str] = None      # gravitational potential, expression in x,y,z
    b0: Optional[tuple] = None     # constant background magnetic field
    # discretization
    dim: int = 3
    divisions: tuple = (4, 4, 4)
    bounds: tuple = ((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0))
    dt: float = 0.005
    t_end: float = 1.0
    upwind: bool = True
    upwind_smoothing: float = 0.01
    # solver
    newton_abs_tol: float = 1e-11
    newton_rel_tol: float = 1e-12
    newton_max_iter: int = 50
    # orchestration
    scenario: Optional[str] = None
    scenario_params: dict = field(default_factory=dict)
    snapshot_interval: float = 0.1
    helicity_every: int = 1
    debug_identities: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}")
        if self.dt <= 0:
            raise ConfigurationError("dt must be positive")
        if self.variant == "barotropic_inviscid" and (self.mu != 0 or self.lam != 0):
            raise ConfigurationError(
                "inviscid variant requires mu = lam = 0 (slip boundary conditions)"
            )
        if self.variant == "full_entropy" and self.eos_type != "ideal_gas":
            raise ConfigurationError("full_entropy variant requires the ideal-gas eos")
        if self.mu < 0 or self.nu < 0:
            raise ConfigurationError("viscosity/resistivity must be nonnegative")
        self.divisions = tuple(int(n) for n in self.divisions)
        self.bounds = tuple((float(a), float(b)) for a, b in self.bounds)
        if self.b0 is not None:
            self.b0 = tuple(float(c) for c in self.b0)

    def make_eos(self):
        if self.eos_type == "polytropic":
            return eos_mod.PolytropicEos(self.K, self.gamma)
        if self.eos_type == "ideal_gas":
            return eos_mod.IdealGasEos(self.K, self.C_v, self.gamma)
        raise ConfigurationError(f"unknown eos {self.eos_type!r}")

    def phi_callable(self):
        if self.phi is None:
            return None
        expr = self.phi
        names = "xyz"

        def phi_fn(pts):
            env = {names[i]: pts[:, i] for i in range(pts.shape[1])}
            env["np"] = np
            return np.broadcast_to(
                np.asarray(eval(expr, {"__builtins__": {}}, env), dtype=float),
                (pts.shape[0],),
            )

        return phi_fn


def _const_field_rhs(space, vec):
    """<vec, phi_a> for a constant vector field, as a dense vector."""
    ref, w = space.cell_quadrature()
    vals = space.tabulate(ref)
    loc = np.einsum("kq,kqac,c->ka", w, vals, np.asarray(vec, dtype=float))
    return space.scatter(loc[:, :, None])[:, 0]


class MhdSystem:
    """Spaces, assembler, and precomputed data for one configuration."""

    def __init__(self, cfg, mesh=None):
        self.cfg = cfg
        self.mesh = mesh if mesh is not None else build_structured_mesh(
            cfg.dim, cfg.divisions, cfg.bounds
        )
        d = self.mesh.dim
        self.inviscid = cfg.variant == "barotropic_inviscid"
        self.vel = make_space("RT0" if self.inviscid else "CG1V", self.mesh)
        self.dg = make_space("DG0", self.mesh)
        self.rt = make_space("RT0", self.mesh)
        self.ned = make_space("NED0", self.mesh)
        self.cgs = make_space("CG1S", self.mesh)
        self.asm = FormAssembler(
            self.vel, self.dg, self.rt, self.ned,
            cgs=self.cgs, smoothing=cfg.upwind_smoothing,
        )
        self.eos = cfg.make_eos()
        self.vol = self.mesh.cell_volumes
        self.box_volume = float(self.vol.sum())

        # constant background field pairings
        if cfg.b0 is not None:
            self.b0_rt = _const_field_rhs(self.rt, cfg.b0)
            self.b0_ned = _const_field_rhs(self.ned, cfg.b0)
            self.b0_vel = _const_field_rhs(self.vel, cfg.b0)
            self.b0_curl = self.asm.D.T @ self.b0_rt
            self.b0_norm2 = float(np.dot(cfg.b0, cfg.b0))
        else:
            self.b0_rt = self.b0_ned = self.b0_vel = self.b0_curl = None
            self.b0_norm2 = 0.0

        phi_fn = cfg.phi_callable()
        if phi_fn is not None:
            ref, w = self.dg.cell_quadrature()
            lam = self.dg._lambdas(ref)
            phys = np.einsum("qi,kid->kqd", lam, self.mesh.cell_coords)
            fv = phi_fn(phys.reshape(-1, d)).reshape(phys.shape[:2])
            self.phibar = np.einsum("kq,kq->k", w, fv) / self.vol
        else:
            self.phibar = np.zeros(self.mesh.num_cells)

        self.M_vel_rt = mixed_mass(self.vel, self.rt) if not self.inviscid else None
        if cfg.mu != 0.0 or cfg.lam != 0.0:
            self.asm.visc_matrices()

        self.has_entropy = cfg.variant == "full_entropy"
        nu_, nr, nb = self.vel.ndof, self.dg.ndof, self.rt.ndof
        offs = [0, nu_, nu_ + nr]
        if self.has_entropy:
            offs.append(nu_ + 2 * nr)
            self.n_unknowns = nu_ + 2 * nr + nb
        else:
            self.n_unknowns = nu_ + nr + nb
        self._offs = offs
        # factored-Jacobian cache shared across steps (keyed by dt)
        self._newton_cache = {}

    # -- state packing -----------------------------------------------------

    def pack(self, state):
        parts = [state.u.coeffs, state.rho.coeffs]
        if self.has_entropy:
            parts.append(state.s.coeffs)
        parts.append(state.B.coeffs)
        return np.concatenate(parts)

    def unpack(self, x, t):
        o = self._offs
        u = FeFunction(self.vel, x[o[0] : o[1]])
        rho = FeFunction(self.dg, x[o[1] : o[2]])
        if self.has_entropy:
            s = FeFunction(self.dg, x[o[2] : o[3]])
            B = FeFunction(self.rt, x[o[3] :])
        else:
            s = None
            B = FeFunction(self.rt, x[o[2] :])
        return State(t=t, u=u, rho=rho, B=B, s=s)

    def split(self, x):
        o = self._offs
        out = [x[o[i] : o[i + 1]] for i in range(len(o) - 1)]
        out.append(x[o[-1] :])
        return out

    # -- residual ----------------------------------------------------------

    def make_residual(self, state_k, dt):
        cfg, asm = self.cfg, self.asm
        upwind = cfg.upwind
        u0 = state_k.u.coeffs
        r0 = state_k.rho.coeffs
        B0c = state_k.B.coeffs
        s0 = state_k.s.coeffs if self.has_entropy else None
        u0_loc = self.vel.gather(u0)                       # (nc, nloc)
        mom0 = asm.mom_mass_apply(r0[:, None], u0[:, None])[:, 0]
        Mloc = asm.Mloc_vel
        visc = cfg.mu != 0.0 or cfg.lam != 0.0
        if visc:
            Kg, Kd = asm.visc_matrices()

        def residual(x):
            single = x.ndim == 1
            if single:
                x = x[:, None]
            if self.has_entropy:
                u1, rho1, s1, B1 = self.split(x)
            else:
                u1, rho1, B1 = self.split(x)
                s1 = None
            m = x.shape[1]
            u_mid = 0.5 * (u0[:, None] + u1)
            rho_mid = 0.5 * (r0[:, None] + rho1)
            B_mid = 0.5 * (B0c[:, None] + B1)

            aux = asm.aux_chain_apply(
                B_mid, u_mid, b0_curl=self.b0_curl, b0_ned=self.b0_ned
            )

            # momentum block; the residual is kept in increment form
            # (multiplied through by dt) so its roundoff floor stays far
            # below the Newton tolerance
            r_u = asm.mom_mass_apply(rho1, u1) - mom0[:, None]
            u1_loc = self.vel.gather(u1)
            w_loc = 0.5 * (
                r0[:, None, None] * u0_loc[:, :, None] + rho1[:, None, :] * u1_loc
            )
            f_u = asm.a_apply(w_loc, u_mid)
            if self.inviscid:
                f_u += asm.ah_facet_apply(u_mid, w_loc, u_mid)
            up_arg = u_mid if upwind else None
            avg_uu = (
                np.einsum("kab,ka,kbm->km", Mloc, u0_loc, u1_loc, optimize=True)
                / self.vol[:, None]
            )
            if self.has_entropy:
                s_mid = 0.5 * (s0[:, None] + s1)
                d1 = 0.5 * (
                    eos_mod.delta1(r0[:, None], rho1, s0[:, None], self.eos)
                    + eos_mod.delta1(r0[:, None], rho1, s1, self.eos)
                )
                d2 = 0.5 * (
                    eos_mod.delta2(s0[:, None], s1, r0[:, None], self.eos)
                    + eos_mod.delta2(s0[:, None], s1, rho1, self.eos)
                )
                theta1 = 0.5 * avg_uu - self.phibar[:, None] - d1
                theta2 = -d2
                f_u += asm.bh_vel_apply(theta1, rho_mid, u_upwind=up_arg)
                f_u += asm.bh_vel_apply(theta2, s_mid, u_upwind=up_arg)
            else:
                theta = 0.5 * avg_uu - eos_mod.delta_quotient(
                    r0[:, None], rho1, self.eos
                )
                f_u += asm.bh_vel_apply(theta, rho_mid, u_upwind=up_arg)
            f_u += asm.M_vel_ned @ aux["alpha"]
            if visc:
                f_u += cfg.mu * (Kg @ u_mid) + (cfg.lam + cfg.mu) * (Kd @ u_mid)
            r_u += dt * f_u

            # density block
            r_rho = self.vol[:, None] * (rho1 - r0[:, None])
            r_rho += dt * asm.bh_dg_apply(rho_mid, u_mid, upwind=upwind)

            blocks = [r_u, r_rho]
            if self.has_entropy:
                r_s = self.vol[:, None] * (s1 - s0[:, None])
                r_s += dt * asm.bh_dg_apply(s_mid, u_mid, upwind=upwind)
                blocks.append(r_s)

            # magnetic block (curl E + nu curl J lies in RT0 exactly)
            ej = aux["E"] + cfg.nu * aux["J"]
            r_B = asm.M_rt @ ((B1 - B0c[:, None]) + dt * (asm.D @ ej))
            blocks.append(r_B)

            r = np.concatenate(blocks, axis=0)
            return r[:, 0] if single else r

        return residual

    def _admissible(self, x):
        if self.has_entropy:
            _, rho1, _, _ = self.split(x)
        else:
            _, rho1, _ = self.split(x)
        return bool(np.all(rho1 > 0))

    def newton_settings(self):
        return NewtonSettings(
            abs_tol=self.cfg.newton_abs_tol,
            rel_tol=self.cfg.newton_rel_tol,
            max_iter=self.cfg.newton_max_iter,
            batched_fd=True,
        )

    def step(self, state, dt=None):
        """Advance one time step; one retry with dt/2 before giving up."""
        dt = self.cfg.dt if dt is None else dt
        try:
            return self._step_once(state, dt)
        except NewtonError:
            half = self._step_once(state, dt / 2)
            return self._step_once(half, dt / 2)

    def _step_once(self, state, dt):
        residual = self.make_residual(state, dt)
        x0 = self.pack(state)
        if self._newton_cache.get("dt") != dt:
            self._newton_cache.clear()
            self._newton_cache["dt"] = dt
        x, iters, final = newton_solve(
            residual, x0, self.newton_settings(), admissible=self._admissible,
            cache=self._newton_cache,
        )
        new = self.unpack(x, state.t + dt)
        new.newton_iters = iters
        new.newton_residual = final
        if np.any(new.rho.coeffs <= 0):
            raise NewtonError(
                "accepted state has nonpositive density", best_x=x
            )
        if self.cfg.debug_identities:
            chk = self.check_identities(state, new, dt)
            tol = 1e3 * self.cfg.newton_abs_tol
            assert abs(chk["identity_kinetic_internal"]) < max(tol, 1e-10), chk
        return new

    def run(self, initial_state, t_end=None, on_snapshot=None):
        """March to t_end, returning one DiagnosticsRecord per step.

        On an unrecoverable Newton failure the partial record list is
        attached to the raised error as `partial_records` so the caller
        can persist what was computed.
        """
        from .diagnostics import VectorPotentialSolver, make_record

        cfg = self.cfg
        t_end = cfg.t_end if t_end is None else t_end
        dt = cfg.dt
        nsteps = int(round(t_end / dt))
        snap_every = max(1, int(round(cfg.snapshot_interval / dt)))
        ps = VectorPotentialSolver(self) if self.mesh.dim == 3 else None
        helicity_every = max(1, cfg.helicity_every)

        state = initial_state
        records = [make_record(self, state, potential_solver=ps)]
        if on_snapshot is not None:
            on_snapshot(state, 0)
        for k in range(1, nsteps + 1):
            prev = state
            try:
                state = self.step(prev)
            except NewtonError as exc:
                exc.partial_records = records
                raise
            solver = ps if (k % helicity_every == 0 or k == nsteps) else None
            records.append(
                make_record(self, state, prev_state=prev, dt=dt, potential_solver=solver)
            )
            if on_snapshot is not None and k % snap_every == 0:
                on_snapshot(state, k // snap_every)
        return records

    # -- functionals used by the stepper and diagnostics -------------------

    def total_energy(self, state):
        """0.5 rho|u|^2 + 0.5|B_total|^2 + eps(rho[,s]) + rho*phi integrated."""
        u_loc = self.vel.gather(state.u.coeffs)
        kin = 0.5 * float(
            np.einsum(
                "k,kab,ka,kb->", state.rho.coeffs, self.asm.Mloc_vel, u_loc, u_loc
            )
        )
        Bc = state.B.coeffs
        mag = 0.5 * float(Bc @ (self.asm.M_rt @ Bc))
        if self.b0_rt is not None:
            mag += float(Bc @ self.b0_rt) + 0.5 * self.b0_norm2 * self.box_volume
        if self.has_entropy:
            eps = self.eos.epsilon(state.rho.coeffs, state.s.coeffs)
        else:
            eps = self.eos.epsilon(state.rho.coeffs)
        internal = float(self.vol @ eps)
        potential = float(self.vol @ (state.rho.coeffs * self.phibar))
        return kin + mag + internal + potential

    def energy_parts(self, state):
        u_loc = self.vel.gather(state.u.coeffs)
        kin = 0.5 * float(
            np.einsum(
                "k,kab,ka,kb->", state.rho.coeffs, self.asm.Mloc_vel, u_loc, u_loc
            )
        )
        Bc = state.B.coeffs
        mag = 0.5 * float(Bc @ (self.asm.M_rt @ Bc))
        if self.b0_rt is not None:
            mag += float(Bc @ self.b0_rt) + 0.5 * self.b0_norm2 * self.box_volume
        eps = (
            self.eos.epsilon(state.rho.coeffs, state.s.coeffs)
            if self.has_entropy
            else self.eos.epsilon(state.rho.coeffs)
        )
        return {
            "kinetic": kin,
            "magnetic": mag,
            "internal": float(self.vol @ eps),
            "potential": float(self.vol @ (state.rho.coeffs * self.phibar)),
        }

    def dissipation(self, state0, state1):
        """d(u_mid, u_mid) + e_h(B_mid_total, B_mid_total) for one step."""
        cfg = self.cfg
        u_mid = 0.5 * (state0.u.coeffs + state1.u.coeffs)
        val = 0.0
        if cfg.mu != 0.0 or cfg.lam != 0.0:
            Kg, Kd = self.asm.visc_matrices()
            val -= cfg.mu * float(u_mid @ (Kg @ u_mid))
            val -= (cfg.lam + cfg.mu) * float(u_mid @ (Kd @ u_mid))
        if cfg.nu != 0.0:
            B_mid = 0.5 * (state0.B.coeffs + state1.B.coeffs)
            rhs = self.asm.D.T @ (self.asm.M_rt @ B_mid)
            if self.b0_curl is not None:
                rhs = rhs + self.b0_curl
            j = self.asm._solve_je(rhs)
            val -= cfg.nu * float(j @ rhs)
        return val

    def check_identities(self, state0, state1, dt):
        """Algebraic step identities, for debug assertions and tests."""
        u0, u1 = state0.u.coeffs, state1.u.coeffs
        r0, r1 = state0.rho.coeffs, state1.rho.coeffs
        u0_loc = self.vel.gather(u0)
        u1_loc = self.vel.gather(u1)
        Mloc = self.asm.Mloc_vel
        eosfn = self.eos
        if self.has_entropy:
            eps0 = eosfn.epsilon(r0, state0.s.coeffs)
            eps1 = eosfn.epsilon(r1, state1.s.coeffs)
        else:
            eps0 = eosfn.epsilon(r0)
            eps1 = eosfn.epsilon(r1)
        lhs = (
            float(
                0.5 * np.einsum("k,kab,ka,kb->", r1, Mloc, u1_loc, u1_loc)
                - 0.5 * np.einsum("k,kab,ka,kb->", r0, Mloc, u0_loc, u0_loc)
            )
            + float(self.vol @ (eps1 - eps0))
        ) / dt
        mom_rate = (
            self.asm.mom_mass_apply(r1[:, None], u1[:, None])[:, 0]
            - self.asm.mom_mass_apply(r0[:, None], u0[:, None])[:, 0]
        ) / dt
        u_mid = 0.5 * (u0 + u1)
        term1 = float(mom_rate @ u_mid)
        avg_uu = (
            np.einsum("kab,ka,kb->k", Mloc, u0_loc, u1_loc) / self.vol
        )
        if self.has_entropy:
            s0c, s1c = state0.s.coeffs, state1.s.coeffs
            d1 = 0.5 * (
                eos_mod.delta1(r0, r1, s0c, eosfn) + eos_mod.delta1(r0, r1, s1c, eosfn)
            )
            d2 = 0.5 * (
                eos_mod.delta2(s0c, s1c, r0, eosfn) + eos_mod.delta2(s0c, s1c, r1, eosfn)
            )
            term2 = float((self.vol * (r1 - r0) / dt) @ (0.5 * avg_uu - d1))
            term2 += float((self.vol * (s1c - s0c) / dt) @ (-d2))
        else:
            dq = eos_mod.delta_quotient(r0, r1, eosfn)
            term2 = float((self.vol * (r1 - r0) / dt) @ (0.5 * avg_uu - dq))
        return {
            "identity_kinetic_internal": lhs - (term1 - term2),
            "scale": max(1.0, abs(lhs), abs(term1), abs(term2)),
        }


def divergence_free_initial_field(system, potential):
    """Exactly divergence-free RT0 field from a vector-potential callable.

    3D: project the potential into NED0 and take the exact curl.
    2D: project a scalar potential into CG1S and take its rotated gradient.
    """
    from .spaces import l2_project

    if system.mesh.dim == 3:
        A = l2_project(system.ned, potential)
    else:
        A = l2_project(system.cgs, potential)
    B = FeFunction(system.rt, system.asm.D @ A.coeffs)
    return B


def max_elementwise_div(B):
    return float(np.abs(elementwise_div(B)).max()) if B.space.ndof else 0.0
