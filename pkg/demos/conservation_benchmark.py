"""Conservation benchmark: ideal 3D run with drift tracking.

Marches the built-in 3D scenario (smooth vortical flow plus a localized
magnetic field on [-1,1]^3, no viscosity or resistivity) and prints the
drift of each conserved functional every few steps.  Mass and div B sit
at machine precision; energy and magnetic helicity track the nonlinear
solver tolerance; cross-helicity is not exactly preserved by the scheme
and drifts slowly.

Run:  python3 demos/conservation_benchmark.py [steps]
(defaults to 40 steps; 200 reproduces the acceptance run)
"""

import sys

from mhdfem.app import build_initial_state, scenario_invariants3d
from mhdfem.diagnostics import VectorPotentialSolver, cross_helicity
from mhdfem.stepper import MhdSystem, max_elementwise_div

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 40

cfg = scenario_invariants3d(1)
system = MhdSystem(cfg)
state = build_initial_state(system)
solver = VectorPotentialSolver(system)

mass0 = float(system.vol @ state.rho.coeffs)
e0 = system.total_energy(state)
h0 = solver.magnetic_helicity(state.B)
ch0 = cross_helicity(system, state.u, state.B)

print(f"initial: mass {mass0:.6f}, energy {e0:.6f}, "
      f"helicity {h0:.3e}, cross-helicity {ch0:.3e}")
print(f"{'t':>6} {'|dmass|':>10} {'|dE|/E':>10} {'|dH|':>10} "
      f"{'|dCH|':>10} {'max divB':>10} {'iters':>5}")

for k in range(1, steps + 1):
    state = system.step(state)
    if k % 5 == 0 or k == steps:
        dm = abs(float(system.vol @ state.rho.coeffs) - mass0)
        de = abs(system.total_energy(state) - e0) / abs(e0)
        dh = abs(solver.magnetic_helicity(state.B) - h0)
        dch = abs(cross_helicity(system, state.u, state.B) - ch0)
        dv = max_elementwise_div(state.B)
        print(f"{state.t:6.3f} {dm:10.2e} {de:10.2e} {dh:10.2e} "
              f"{dch:10.2e} {dv:10.2e} {state.newton_iters:5d}")
