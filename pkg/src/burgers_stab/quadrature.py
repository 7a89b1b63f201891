"""Gaussian quadrature on triangles.

Rules come from the collapsed (Duffy) square: Gauss-Jacobi with weight
``(1-x)`` in the collapsed direction and Gauss-Legendre in the other.  With
``n`` points per direction the rule integrates polynomials of total degree
``2n - 1`` exactly.
"""

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

__all__ = ["triangle_rule", "integrate"]


@lru_cache(maxsize=None)
def triangle_rule(order):
    """Barycentric points ``(nq, 3)`` and weights ``(nq,)`` summing to 1.

    The rule is exact for polynomials of total degree ``<= order``; weights are
    normalised so that ``sum(w * f) * area`` approximates the integral.
    """
    if order < 0:
        raise ValueError("quadrature order must be non-negative")
    n = max(1, (order + 2) // 2)
    xu, wu = roots_jacobi(n, 1.0, 0.0)
    xv, wv = roots_legendre(n)
    u = 0.5 * (xu + 1.0)
    v = 0.5 * (xv + 1.0)
    # int_T f = int_0^1 int_0^1 f(u, (1-u) v) (1-u) dv du
    wu = wu / 4.0
    wv = wv / 2.0
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv)
    l1 = U.ravel()
    l2 = ((1.0 - U) * V).ravel()
    bary = np.stack([1.0 - l1 - l2, l1, l2], axis=1)
    w = 2.0 * W.ravel()        # reference triangle has area 1/2
    bary.setflags(write=False)
    w.setflags(write=False)
    return bary, w


def physical_points(mesh, order):
    """Quadrature points of every triangle, shape ``(nt, nq, 2)``."""
    bary, _ = triangle_rule(order)
    xy = mesh.vertices[mesh.triangles]          # (nt, 3, 2)
    return np.einsum("qa,tad->tqd", bary, xy)


def integrate(mesh, values, order):
    """Sum over triangles of ``area * sum_q w_q values[t, q]``."""
    _, w = triangle_rule(order)
    area, _ = mesh.geometry()
    return float(np.sum(area * (values @ w)))
