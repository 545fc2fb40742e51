"""Direct solvers and a damped Newton driver with finite-difference Jacobian.

The Jacobian is formed column-wise by forward differences on the residual.
Residual callables may advertise batch support (an (n, m) input yields an
(n, m) output), in which case all columns are evaluated in one call; this
is what makes the implicit MHD step affordable in pure numpy.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import NewtonError, SolverError


def lu_solve(A, b):
    """Solve Ax = b by LU factorization (sparse or dense A)."""
    b = np.asarray(b, dtype=float)
    if sp.issparse(A):
        try:
            x = splu(A.tocsc()).solve(b)
        except RuntimeError as exc:
            raise SolverError(f"sparse LU failed: {exc}") from exc
    else:
        A = np.asarray(A, dtype=float)
        lu, piv = scipy.linalg.lu_factor(A)
        diag = np.abs(np.diag(lu))
        if diag.min() <= 1e-300:
            raise SolverError(
                f"singular pivot at row {int(diag.argmin())} in LU factorization"
            )
        x = scipy.linalg.lu_solve((lu, piv), b)
    if not np.all(np.isfinite(x)):
        raise SolverError("LU solve produced non-finite values")
    return x


@dataclass
class NewtonSettings:
    abs_tol: float = 1e-11
    rel_tol: float = 1e-12
    max_iter: int = 50
    fd_epsilon: float = 1e-7
    max_halvings: int = 8
    batched_fd: bool = False
    fd_chunk: int = 1024

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


def _fd_jacobian(residual, x, r, settings):
    n = len(x)
    h = settings.fd_epsilon * (1.0 + np.abs(x))
    J = np.empty((len(r), n))
    if settings.batched_fd:
        for lo in range(0, n, settings.fd_chunk):
            hi = min(lo + settings.fd_chunk, n)
            X = np.repeat(x[:, None], hi - lo, axis=1)
            X[lo + np.arange(hi - lo), np.arange(hi - lo)] += h[lo:hi]
            R = residual(X)
            J[:, lo:hi] = (R - r[:, None]) / h[lo:hi]
    else:
        for i in range(n):
            xp = x.copy()
            xp[i] += h[i]
            J[:, i] = (residual(xp) - r) / h[i]
    return J


def newton_solve(residual, x0, settings=None, admissible=None, cache=None):
    """Damped chord-Newton iteration on `residual` from initial guess `x0`.

    Returns (x, iterations, final_residual_norm).  The factored Jacobian
    is reused as long as the iteration keeps contracting the residual,
    and (via `cache`, a dict holding the factorization under "lu") even
    across consecutive calls; chord iterations cost one residual each,
    so a stale but usable Jacobian is far cheaper than a rebuild.

    `admissible`, if given, rejects trial iterates (e.g. nonpositive
    densities) during backtracking.

    Raises NewtonError (carrying the best iterate) on non-convergence.
    """
    settings = settings or NewtonSettings()
    x = np.asarray(x0, dtype=float).copy()
    r = residual(x)
    norm = np.linalg.norm(r)
    target = max(settings.abs_tol, settings.rel_tol * norm)
    if norm <= target:
        return x, 0, norm

    lu = None if cache is None else cache.get("lu")
    stale = False
    since_rebuild = 0
    for it in range(1, settings.max_iter + 1):
        if lu is None or stale:
            J = _fd_jacobian(residual, x, r, settings)
            lu = scipy.linalg.lu_factor(J)
            if cache is not None:
                cache["lu"] = lu
            stale = False
            since_rebuild = 0
        dx = -scipy.linalg.lu_solve(lu, r)

        step = 1.0
        accepted = False
        for _ in range(settings.max_halvings + 1):
            x_trial = x + step * dx
            if admissible is None or admissible(x_trial):
                r_trial = residual(x_trial)
                norm_trial = np.linalg.norm(r_trial)
                if np.isfinite(norm_trial) and norm_trial < norm:
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            if not stale and lu is not None:
                # retry this iteration with a fresh Jacobian
                stale = True
                lu = None
                continue
            raise NewtonError(
                f"no descent after {settings.max_halvings} halvings "
                f"(iteration {it}, residual {norm:.3e})",
                best_x=x,
                residual_norm=norm,
                iterations=it,
            )

        since_rebuild += 1
        # a frozen Jacobian is kept while the iteration contracts well;
        # the iteration cap only guards against slow creep, so it sits
        # above the typical per-step chord iteration count
        if norm_trial > 0.9 * norm or since_rebuild >= 40:
            stale = True
        x, r, norm = x_trial, r_trial, norm_trial
        if norm <= target:
            return x, it, norm

    raise NewtonError(
        f"no convergence in {settings.max_iter} iterations "
        f"(residual {norm:.3e}, target {target:.3e})",
        best_x=x,
        residual_norm=norm,
        iterations=settings.max_iter,
    )
