"""Command-line entry point: configs, scenario presets, CSV/VTK output.

Verbs:
  run <config.toml>                 march a configured simulation
  scenario invariants3d [--factor]  the 3D conservation benchmark
  scenario rt --b0 V [--factor]     the 2D magnetic Rayleigh-Taylor setup
  check                             fast structural self-tests on tiny meshes

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigurationError, NewtonError, SolverError
from .spaces import l2_project, eval_cells, FeFunction
from .stepper import MhdSystem, SimConfig, State, divergence_free_initial_field

_SCHEMA = {
    "mesh": {"dim", "divisions", "bounds"},
    "physics": {"variant", "mu", "lam", "nu", "phi", "b0"},
    "eos": {"type", "K", "gamma", "C_v"},
    "time": {"dt", "t_end"},
    "solver": {
        "newton_abs_tol", "newton_rel_tol", "newton_max_iter",
        "upwind", "upwind_smoothing",
    },
    "output": {"directory", "snapshot_interval", "helicity_every"},
    "scenario": {"name", "b0", "factor"},
}


def parse_config(path):
    """Read and validate a TOML run configuration."""
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"malformed config {path}: {exc}") from exc

    for section, table in data.items():
        if section not in _SCHEMA:
            raise ConfigurationError(f"unknown section [{section}]")
        if not isinstance(table, dict):
            raise ConfigurationError(f"[{section}] must be a table")
        for key in table:
            if key not in _SCHEMA[section]:
                raise ConfigurationError(f"unknown key {key!r} in [{section}]")

    mesh = data.get("mesh", {})
    phys = data.get("physics", {})
    eos = data.get("eos", {})
    tm = data.get("time", {})
    sol = data.get("solver", {})
    out = data.get("output", {})
    scen = data.get("scenario", {})

    kwargs = {}
    if "variant" in phys:
        kwargs["variant"] = str(phys["variant"]).lower()
    for src, names in ((phys, ("mu", "lam", "nu", "phi")),
                       (tm, ("dt", "t_end"))):
        for n in names:
            if n in src:
                kwargs[n] = src[n]
    if "b0" in phys:
        kwargs["b0"] = tuple(phys["b0"])
    if "type" in eos:
        kwargs["eos_type"] = str(eos["type"]).lower()
    for n in ("K", "gamma", "C_v"):
        if n in eos:
            kwargs[n] = float(eos[n])
    for n in ("dim",):
        if n in mesh:
            kwargs[n] = int(mesh[n])
    if "divisions" in mesh:
        kwargs["divisions"] = tuple(mesh["divisions"])
    if "bounds" in mesh:
        kwargs["bounds"] = tuple(tuple(b) for b in mesh["bounds"])
    for n in ("newton_abs_tol", "newton_rel_tol", "newton_max_iter",
              "upwind", "upwind_smoothing", "snapshot_interval",
              "helicity_every"):
        for src in (sol, out):
            if n in src:
                kwargs[n] = src[n]
    if "name" in scen:
        kwargs["scenario"] = str(scen["name"])
        kwargs["scenario_params"] = {
            k: scen[k] for k in ("b0", "factor") if k in scen
        }
    try:
        cfg = SimConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from exc
    if cfg.mu > 0 and 2 * cfg.mu + 3 * cfg.lam < 0:
        warnings.warn("viscosity coefficients violate 2*mu + 3*lam >= 0")
    cfg.output_dir = out.get("directory", "output")
    return cfg


def serialize_config(cfg):
    """Write a SimConfig back to its TOML form (parse round-trips)."""

    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, float):
            return repr(v)
        if isinstance(v, str):
            return '"' + v + '"'
        if isinstance(v, (tuple, list)):
            return "[" + ", ".join(fmt(x) for x in v) + "]"
        raise TypeError(f"cannot serialize {v!r}")

    lines = ["[mesh]",
             f"dim = {cfg.dim}",
             f"divisions = {fmt(cfg.divisions)}",
             f"bounds = {fmt(cfg.bounds)}",
             "", "[physics]",
             f'variant = "{cfg.variant}"',
             f"mu = {fmt(cfg.mu)}", f"lam = {fmt(cfg.lam)}",
             f"nu = {fmt(cfg.nu)}"]
    if cfg.phi is not None:
        lines.append(f'phi = "{cfg.phi}"')
    if cfg.b0 is not None:
        lines.append(f"b0 = {fmt(cfg.b0)}")
    lines += ["", "[eos]", f'type = "{cfg.eos_type}"',
              f"K = {fmt(cfg.K)}", f"gamma = {fmt(cfg.gamma)}",
              f"C_v = {fmt(cfg.C_v)}",
              "", "[time]", f"dt = {fmt(cfg.dt)}", f"t_end = {fmt(cfg.t_end)}",
              "", "[solver]",
              f"newton_abs_tol = {fmt(cfg.newton_abs_tol)}",
              f"newton_rel_tol = {fmt(cfg.newton_rel_tol)}",
              f"newton_max_iter = {cfg.newton_max_iter}",
              f"upwind = {fmt(cfg.upwind)}",
              f"upwind_smoothing = {fmt(cfg.upwind_smoothing)}",
              "", "[output]",
              f'directory = "{getattr(cfg, "output_dir", "output")}"',
              f"snapshot_interval = {fmt(cfg.snapshot_interval)}",
              f"helicity_every = {cfg.helicity_every}"]
    if cfg.scenario is not None:
        lines += ["", "[scenario]", f'name = "{cfg.scenario}"']
        for k, v in cfg.scenario_params.items():
            lines.append(f"{k} = {fmt(v)}")
    return "\n".join(lines) + "\n"


# -- scenario presets ------------------------------------------------------


def scenario_invariants3d(resolution_factor=1):
    """3D periodic-free conservation benchmark on [-1,1]^3."""
    if resolution_factor < 1:
        raise ConfigurationError("resolution factor must be >= 1")
    n = max(1, int(round(4 / resolution_factor)))
    return SimConfig(
        variant="barotropic_inviscid",
        mu=0.0, lam=0.0, nu=0.0,
        eos_type="polytropic", K=1.0, gamma=5.0 / 3.0,
        dim=3, divisions=(n, n, n),
        bounds=((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)),
        dt=0.005, t_end=1.0,
        scenario="invariants3d",
        scenario_params={"factor": resolution_factor},
    )


def scenario_rayleigh_taylor(b0, resolution_factor=1):
    """2D magnetic Rayleigh-Taylor setup on [0, 1/4] x [0, 1]."""
    if b0 < 0:
        raise ConfigurationError("background field strength must be >= 0")
    if resolution_factor < 1:
        raise ConfigurationError("resolution factor must be >= 1")
    nx = max(1, int(round(32 / resolution_factor)))
    ny = max(1, int(round(128 / resolution_factor)))
    return SimConfig(
        variant="full_entropy",
        mu=0.01, lam=0.01, nu=0.01,
        eos_type="ideal_gas", K=1.0, C_v=1.0, gamma=5.0 / 3.0,
        phi="-y",
        b0=(float(b0), 0.0),
        dim=2, divisions=(nx, ny),
        bounds=((0.0, 0.25), (0.0, 1.0)),
        dt=0.005, t_end=5.0,
        scenario="rayleigh_taylor",
        scenario_params={"b0": float(b0), "factor": resolution_factor},
    )


def _rt_pressure(x, y):
    return 1.5 * y + 1.25 + (0.25 - 0.5 * y) * np.tanh((y - 0.5) / 0.02)


def build_initial_state(system):
    """Initial fields of the configured scenario, by L2 projection."""
    cfg = system.cfg
    if cfg.scenario == "invariants3d":

        def u0(p):
            sx, sy, sz = (np.sin(np.pi * p[:, i]) for i in range(3))
            cx, cy, cz = (np.cos(np.pi * p[:, i]) for i in range(3))
            return np.stack([sx * cy * cz, cx * sy * cz, cx * cy * sz], axis=1)

        def rho0(p):
            return 2.0 + np.prod(np.sin(np.pi * p), axis=1)

        def potential(p):
            bump = np.prod(1.0 - p**2, axis=1)
            return 0.5 * bump[:, None] * np.sin(np.pi * p)

        return State(
            t=0.0,
            u=l2_project(system.vel, u0),
            rho=l2_project(system.dg, rho0),
            B=divergence_free_initial_field(system, potential),
        )

    if cfg.scenario == "rayleigh_taylor":
        gamma, K, C_v = cfg.gamma, cfg.K, cfg.C_v

        def rho0(p):
            return 1.5 - 0.5 * np.tanh((p[:, 1] - 0.5) / 0.02)

        def u0(p):
            x, y = p[:, 0], p[:, 1]
            r = rho0(p)
            pr = _rt_pressure(x, y)
            uy = (
                -0.025
                * np.sqrt(gamma * pr / r)
                * np.cos(8 * np.pi * x)
                * np.exp(-((y - 0.5) ** 2) / 0.09)
            )
            return np.stack([np.zeros_like(uy), uy], axis=1)

        def s0(p):
            r = rho0(p)
            pr = _rt_pressure(p[:, 0], p[:, 1])
            return C_v * r * np.log(pr / ((gamma - 1.0) * K * r**gamma))

        return State(
            t=0.0,
            u=l2_project(system.vel, u0),
            rho=l2_project(system.dg, rho0),
            B=FeFunction(system.rt, np.zeros(system.rt.ndof)),
            s=l2_project(system.dg, s0),
        )

    raise ConfigurationError(f"no initial data for scenario {cfg.scenario!r}")


# -- output ----------------------------------------------------------------

CSV_HEADER = (
    "t,mass,energy,cross_helicity,magnetic_helicity,"
    "div_b_l2,energy_residual,newton_iters"
)


def write_diagnostics_csv(records, path):
    try:
        with open(path, "w") as f:
            f.write(CSV_HEADER + "\n")
            for r in records:
                f.write(
                    f"{r.t:.17g},{r.mass:.17g},{r.energy:.17g},"
                    f"{r.cross_helicity:.17g},{r.magnetic_helicity:.17g},"
                    f"{r.div_b_l2:.17g},{r.energy_residual:.17g},"
                    f"{r.newton_iters}\n"
                )
    except OSError as exc:
        raise ConfigurationError(f"cannot write {path}: {exc}") from exc


_VTK_CELL_TYPE = {2: 5, 3: 10}  # triangle, tetrahedron


def write_vtk_snapshot(state, system, path):
    """Legacy ASCII unstructured-grid snapshot with cell data."""
    mesh = system.mesh
    d = mesh.dim
    center = np.full((1, d), 1.0 / (d + 1))
    cells = np.arange(mesh.num_cells)
    u_c = eval_cells(state.u, cells, center)[:, 0, :]
    B_c = eval_cells(state.B, cells, center)[:, 0, :]
    if system.cfg.b0 is not None:
        B_c = B_c + np.asarray(system.cfg.b0)

    def vec3(a):
        if a.shape[1] == 3:
            return a
        return np.concatenate([a, np.zeros((len(a), 1))], axis=1)

    try:
        with open(path, "w") as f:
            f.write("# vtk DataFile Version 3.0\n")
            f.write(f"simulation state t={state.t:.17g}\n")
            f.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
            nv = len(mesh.vertices)
            f.write(f"POINTS {nv} double\n")
            pts = np.concatenate(
                [mesh.vertices, np.zeros((nv, 3 - d))], axis=1
            )
            for p in pts:
                f.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
            nc, nl = mesh.cells.shape
            f.write(f"CELLS {nc} {nc * (nl + 1)}\n")
            for c in mesh.cells:
                f.write(str(nl) + " " + " ".join(str(int(i)) for i in c) + "\n")
            f.write(f"CELL_TYPES {nc}\n")
            f.write("\n".join([str(_VTK_CELL_TYPE[d])] * nc) + "\n")
            f.write(f"CELL_DATA {nc}\n")
            f.write("SCALARS rho double 1\nLOOKUP_TABLE default\n")
            f.write("\n".join(f"{v:.17g}" for v in state.rho.coeffs) + "\n")
            if state.s is not None:
                f.write("SCALARS s double 1\nLOOKUP_TABLE default\n")
                f.write("\n".join(f"{v:.17g}" for v in state.s.coeffs) + "\n")
            f.write("VECTORS u double\n")
            for v in vec3(u_c):
                f.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
            f.write("VECTORS B double\n")
            for v in vec3(B_c):
                f.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
    except OSError as exc:
        raise ConfigurationError(f"cannot write {path}: {exc}") from exc


# -- orchestration ---------------------------------------------------------


def run_simulation(cfg, out_dir=None, t_end=None):
    """Build the system, march, and persist CSV plus VTK snapshots."""
    out = Path(out_dir if out_dir is not None else getattr(cfg, "output_dir", "output"))
    out.mkdir(parents=True, exist_ok=True)
    system = MhdSystem(cfg)
    state0 = build_initial_state(system)

    def snapshot(state, index):
        write_vtk_snapshot(state, system, out / f"snapshot_{index:04d}.vtk")

    try:
        records = system.run(state0, t_end=t_end, on_snapshot=snapshot)
    except NewtonError as exc:
        partial = getattr(exc, "partial_records", [])
        if partial:
            write_diagnostics_csv(partial, out / "diagnostics_partial.csv")
        raise
    write_diagnostics_csv(records, out / "diagnostics.csv")
    return records


def run_check():
    """Fast structural self-tests on tiny meshes; returns the failure count."""
    from .forms import FormAssembler
    from .mesh import build_structured_mesh
    from .spaces import make_space

    failures = 0
    rng = np.random.default_rng(0)
    for dim, div, bounds in (
        (2, (1, 1), ((0.0, 1.0), (0.0, 1.0))),
        (3, (1, 1, 1), ((0.0, 1.0),) * 3),
    ):
        mesh = build_structured_mesh(dim, div, bounds)
        dg = make_space("DG0", mesh)
        rt = make_space("RT0", mesh)
        ned = make_space("NED0", mesh)
        cgs = make_space("CG1S", mesh)
        asm = FormAssembler(rt, dg, rt, ned, cgs=cgs)

        def report(name, err, tol=1e-12):
            nonlocal failures
            ok = err <= tol
            failures += 0 if ok else 1
            print(f"  [{'ok' if ok else 'FAIL'}] {dim}D {name}: {err:.2e}")

        err_a = err_curl = err_lorentz = err_bh = 0.0
        ones = FeFunction(dg, np.ones(dg.ndof))
        for _ in range(20):
            w = FeFunction(rt, rng.standard_normal(rt.ndof))
            u = FeFunction(rt, rng.standard_normal(rt.ndof))
            v = FeFunction(rt, rng.standard_normal(rt.ndof))
            g = FeFunction(dg, rng.standard_normal(dg.ndof))
            err_a = max(err_a, abs(asm.form_a(w, u, v) + asm.form_a(w, v, u)))
            err_bh = max(err_bh, abs(asm.form_bh(ones, g, u)))
            Bc = FeFunction(rt, asm.D @ rng.standard_normal(asm.je_space.ndof))
            aux = asm.build_aux_chain(Bc, u)
            lhs = float(v.coeffs @ (asm.M_vel_ned @ aux.alpha.coeffs))
            err_lorentz = max(err_lorentz, abs(lhs + asm.form_ch_direct(Bc, Bc, v)))
            if dim == 3:
                Af = FeFunction(ned, rng.standard_normal(ned.ndof))
                curlA = FeFunction(rt, asm.D @ Af.coeffs)
                err_curl = max(err_curl, abs(asm.form_ch_direct(Af, curlA, v)))
        report("advection antisymmetry", err_a)
        report("advection of constants vanishes", err_bh)
        report("Lorentz adjoint identity", err_lorentz)
        if dim == 3:
            report("curl-annihilation identity", err_curl)
    return failures


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="mhdfem", description="structure-preserving compressible MHD solver"
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    p_run = sub.add_parser("run", help="run a configured simulation")
    p_run.add_argument("config")
    p_scen = sub.add_parser("scenario", help="run a built-in scenario")
    p_scen.add_argument("name", choices=["invariants3d", "rt"])
    p_scen.add_argument("--b0", type=float, default=0.4)
    p_scen.add_argument("--factor", type=int, default=1)
    p_scen.add_argument("--t-end", type=float, default=None)
    p_scen.add_argument("--out", default=None)
    sub.add_parser("check", help="run fast structural self-tests")
    args = parser.parse_args(argv)

    try:
        if args.verb == "run":
            cfg = parse_config(args.config)
            records = run_simulation(cfg)
            print(f"completed {len(records) - 1} steps")
            return 0
        if args.verb == "scenario":
            if args.name == "invariants3d":
                cfg = scenario_invariants3d(args.factor)
            else:
                cfg = scenario_rayleigh_taylor(args.b0, args.factor)
            out = args.out or f"output_{args.name}"
            records = run_simulation(cfg, out_dir=out, t_end=args.t_end)
            print(f"completed {len(records) - 1} steps; output in {out}")
            return 0
        if args.verb == "check":
            failures = run_check()
            if failures:
                print(f"{failures} checks failed")
                return 3
            print("all checks passed")
            return 0
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (NewtonError, SolverError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
