"""Magnetic stabilization of a heavy-over-light interface.

A dense fluid sits above a light one in a downward gravity field; the
interface is unstable and a small velocity perturbation grows.  A
horizontal magnetic field threads the interface, and above a critical
strength the field tension suppresses the growth.  This script runs the
built-in two-dimensional setup for a weak and a strong field and prints
the interface perturbation amplitude (the L2 deviation of the density
from its horizontal average) over time.

Run:  python3 demos/magnetic_interface_stability.py [factor]
(factor coarsens the grid; the default 4 runs in a few minutes)
"""

import sys

import numpy as np

from mhdfem.app import build_initial_state, scenario_rayleigh_taylor
from mhdfem.stepper import MhdSystem

factor = int(sys.argv[1]) if len(sys.argv) > 1 else 4


def amplitude(system, state):
    mesh = system.mesh
    y_c = np.array([mesh.vertices[c].mean(axis=0)[1] for c in mesh.cells])
    rho, vol = state.rho.coeffs, mesh.cell_volumes
    amp2 = 0.0
    for y in np.unique(np.round(y_c, 9)):
        sel = np.isclose(y_c, y)
        avg = float(vol[sel] @ rho[sel]) / float(vol[sel].sum())
        amp2 += float(vol[sel] @ (rho[sel] - avg) ** 2)
    return np.sqrt(amp2)


for b0 in (0.2, 0.8):
    cfg = scenario_rayleigh_taylor(b0, factor)
    cfg.dt = 0.01
    cfg.newton_abs_tol = 1e-9  # qualitative run; keep the steps cheap
    system = MhdSystem(cfg)
    state = build_initial_state(system)
    print(f"\nhorizontal field b0 = {b0} "
          f"(grid {cfg.divisions[0]}x{cfg.divisions[1]}):")
    for k in range(150):
        state = system.step(state)
        if (k + 1) % 25 == 0:
            print(f"  t = {state.t:4.2f}  amplitude = "
                  f"{amplitude(system, state):.3e}")
