"""Steady states, consistent and manufactured forcings, coercivity margins."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from . import field_expr as fe
from .errors import ArgumentError, ConvergenceError, NumericalError
from .fem import assemble_nonlinear
from .mesh import check_dofs

__all__ = ["SteadyProfile", "CoercivityReport", "steady_profile",
           "forcing_from_steady", "solve_steady_picard", "manufactured_forcing",
           "coercivity_margin"]


@dataclass(frozen=True)
class SteadyProfile:
    y_s: fe.Expr
    grad: tuple
    laplacian: fe.Expr
    f_s: fe.Expr


@dataclass(frozen=True)
class CoercivityReport:
    margin: float
    grad_margin: float
    level: int


def _advect(v, e):
    """``v . grad e`` as an expression."""
    d1, d2 = fe.gradient(e)
    return fe.const(v[0]) * d1 + fe.const(v[1]) * d2


def forcing_from_steady(y_s, params):
    """``f_s = -eta lap(y_s) + y_s v.grad(y_s) + nu0 y_s``."""
    return (fe.const(-params.eta) * fe.laplacian(y_s)
            + y_s * _advect(params.v, y_s)
            + fe.const(params.nu0) * y_s)


def steady_profile(y_s, params):
    return SteadyProfile(y_s, fe.gradient(y_s), fe.laplacian(y_s),
                         forcing_from_steady(y_s, params))


def manufactured_forcing(z_exact, y_s, params):
    """Forcing ``g`` for which ``z_exact`` solves the shifted nonlinear equation.

    ``g = z_t - eta lap z + e^{-wt} z v.grad z + y_s v.grad z
    + (v.grad y_s) z + (nu0 - w) z`` with ``u = 0``.
    """
    omega = params.omega
    if omega:
        decay = fe.Call("exp", fe.const(-omega) * fe.Var("t"))
    else:
        decay = fe.ONE
    return (fe.diff(z_exact, "t")
            + fe.const(-params.eta) * fe.laplacian(z_exact)
            + decay * z_exact * _advect(params.v, z_exact)
            + y_s * _advect(params.v, z_exact)
            + _advect(params.v, y_s) * z_exact
            + fe.const(params.nu0 - omega) * z_exact)


def solve_steady_picard(matrices, load, params=None, tol=1e-10, max_iter=200):
    """Fixed-point iteration ``(eta K + nu0 M) Y+ = F - N(Y) Y`` from ``Y = 0``.

    Stops once ``||Y+ - Y||_M <= tol``.  Returns ``(Y, increments)``.
    """
    if not tol > 0:
        raise ArgumentError("tolerance must be positive")
    params = params or matrices.params
    mesh = matrices.mesh
    load = check_dofs(mesh, load)
    lu = spla.splu((params.eta * matrices.K + params.nu0 * matrices.M).tocsc())
    Y = np.zeros(mesh.n_dofs)
    increments = []
    for _ in range(max_iter):
        Y_new = lu.solve(load - assemble_nonlinear(mesh, Y, params.v))
        d = Y_new - Y
        increments.append(float(np.sqrt(max(d @ (matrices.M @ d), 0.0))))
        Y = Y_new
        if not np.isfinite(increments[-1]):
            break
        if increments[-1] <= tol:
            return Y, increments
    raise ConvergenceError(f"Picard iteration stalled after {len(increments)} steps",
                           increments)


def coercivity_margin(matrices, params=None, gain=None):
    """Discrete coercivity of ``a(., .)`` and gradient margin.

    ``margin`` is the smallest eigenvalue of the pencil
    ``(Sym(eta K + A1 + A2 + nu0 M), M)``.  ``grad_margin`` is the smallest
    eigenvalue of ``(Sym(-C), K)`` where ``C`` is the open-loop drift, or
    the shifted closed-loop drift when a Riccati ``gain`` is supplied.
    """
    params = params or matrices.params
    M = matrices.M.toarray()
    K = matrices.K.toarray()
    if M.shape[0] > 1000:
        raise ArgumentError("dense eigensolve limited to k <= 5")
    op = (params.eta * matrices.K + matrices.A1 + matrices.A2
          + params.nu0 * matrices.M).toarray()
    try:
        margin = sla.eigh(0.5 * (op + op.T), M, eigvals_only=True)[0]
        if gain is None:
            C = -op
        else:
            C = matrices.A_shift.toarray() - matrices.B @ gain.gain
        grad = sla.eigh(-0.5 * (C + C.T), K, eigvals_only=True)[0]
    except sla.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from None
    return CoercivityReport(float(margin), float(grad), matrices.mesh.k)
