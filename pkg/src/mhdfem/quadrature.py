"""Gauss quadrature rules on reference simplices.

Rules are conical products (Duffy collapse with Gauss-Jacobi weights),
so they are exact for total polynomial degree <= 2n-1 with n points per
direction.  All assembled integrands in this package have degree <= 4,
so the default n=3 (degree 5) integrates them exactly.
"""

import numpy as np
from scipy.special import roots_jacobi


def _jacobi01(n, alpha):
    """Gauss-Jacobi nodes/weights for weight (1-t)^alpha on [0,1]."""
    x, w = roots_jacobi(n, alpha, 0.0)
    return (x + 1.0) / 2.0, w / 2.0 ** (alpha + 1)


def interval_rule(n=3):
    """Gauss-Legendre rule on [0,1]; weights sum to 1."""
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


def simplex_rule(dim, n=3):
    """Quadrature on the unit reference simplex in `dim` dimensions.

    Returns (points, weights) with points of shape (nq, dim) and weights
    summing to the reference volume 1/dim!.
    """
    if dim == 1:
        x, w = interval_rule(n)
        return x[:, None], w
    if dim == 2:
        t1, w1 = _jacobi01(n, 0.0)
        t2, w2 = _jacobi01(n, 1.0)
        pts = np.array([(a * (1 - b), b) for b in t2 for a in t1])
        wts = np.array([wa * wb for wb in w2 for wa in w1])
        return pts, wts
    if dim == 3:
        t1, w1 = _jacobi01(n, 0.0)
        t2, w2 = _jacobi01(n, 1.0)
        t3, w3 = _jacobi01(n, 2.0)
        pts = np.array(
            [
                (a * (1 - b) * (1 - c), b * (1 - c), c)
                for c in t3
                for b in t2
                for a in t1
            ]
        )
        wts = np.array([wa * wb * wc for wc in w3 for wb in w2 for wa in w1])
        return pts, wts
    raise ValueError(f"unsupported dimension {dim}")
