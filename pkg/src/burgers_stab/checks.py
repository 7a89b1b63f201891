"""Numerical self-checks run by ``burgers-stab verify``.

Each check returns a :class:`CheckResult`; none of them raises on a failed
property, so a whole suite can be reported in one pass.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import field_expr as fe
from .fem import (PhysicsParams, assemble_nonlinear, assemble_nonlinear_jacobian,
                  assemble_static)
from .mesh import build_uniform_mesh
from .riccati import CareProblem, solve_care, solve_generalized_care

__all__ = ["CheckResult", "check_skew_identity", "check_energy_identity",
           "check_jacobian", "check_scalar_care", "check_care_residual",
           "default_suite"]

BUBBLE = "x1*x2*(1-x1)*(1-x2)"
SINE = "sin(pi*x1)*sin(pi*x2)"


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: {self.value:.3e} (tol {self.tolerance:.1e})"


def _result(name, value, tol):
    return CheckResult(name, bool(np.isfinite(value) and value <= tol), float(value), tol)


def check_skew_identity(ys, params, level=3, quad_order=None):
    """``max|A1 + A1^T + A2|``; tolerance 1e-12 for polynomial ``y_s``, else 1e-8."""
    y_s = fe.parse(ys) if isinstance(ys, str) else ys
    mats = assemble_static(build_uniform_mesh(level), params, y_s, None, quad_order)
    S = mats.A1 + mats.A1.T + mats.A2
    value = abs(S).max() if S.nnz else 0.0
    tol = 1e-8 if y_s.uses_transcendental() else 1e-12
    return _result(f"skew identity (y_s = {fe.to_string(y_s)}, k={level}, "
                   f"quadrature {mats.quad_order})", value, tol)


def check_energy_identity(rng, level=3, samples=100, v=(1.0, 1.0)):
    """``|Z^T N(Z)| / ||Z||^3`` over random states."""
    mesh = build_uniform_mesh(level)
    worst = 0.0
    for _ in range(samples):
        Z = rng.standard_normal(mesh.n_dofs)
        worst = max(worst, abs(Z @ assemble_nonlinear(mesh, Z, v))
                    / np.linalg.norm(Z) ** 3)
    return _result(f"Z^T N(Z) = 0 ({samples} random states, k={level})", worst, 1e-12)


def check_jacobian(rng, levels=(1, 2, 3), v=(1.0, 1.0), eps=1e-6):
    """Relative central-difference error of the Jacobian of ``N``."""
    worst = 0.0
    for k in levels:
        mesh = build_uniform_mesh(k)
        Z = rng.standard_normal(mesh.n_dofs)
        d = rng.standard_normal(mesh.n_dofs)
        J = assemble_nonlinear_jacobian(mesh, Z, v)
        fd = (assemble_nonlinear(mesh, Z + eps * d, v)
              - assemble_nonlinear(mesh, Z - eps * d, v)) / (2 * eps)
        exact = J @ d
        worst = max(worst, np.linalg.norm(fd - exact) / max(np.linalg.norm(exact), 1e-300))
    return _result(f"Jacobian vs finite differences (k in {tuple(levels)})", worst, 1e-6)


def check_scalar_care():
    """With ``a = -1``, ``b = 1`` the equation is ``p^2 + 2p - 1 = 0``.

    Its nonnegative (stabilizing) root is ``-1 + sqrt(2)``.
    """
    P, _, _ = solve_care(np.array([[-1.0]]), np.array([[1.0]]))
    return _result("scalar CARE (a=-1, b=1) vs -1+sqrt(2)",
                   abs(P[0, 0] - (math.sqrt(2.0) - 1.0)), 1e-12)


def check_care_residual(ys, params, level=3, region="full", quad_order=None):
    y_s = fe.parse(ys) if isinstance(ys, str) else ys
    mats = assemble_static(build_uniform_mesh(level), params, y_s, region, quad_order)
    sol = solve_generalized_care(CareProblem.from_matrices(mats))
    ok = sol.relative_residual <= 1e-10 and sol.closed_loop_abscissa < 0
    res = _result(f"generalized ARE residual (k={level})", sol.relative_residual, 1e-10)
    return CheckResult(res.name + f", closed-loop abscissa {sol.closed_loop_abscissa:.3f}",
                       bool(ok), res.value, res.tolerance)


def default_suite(rng, config=None):
    """Run the standard checks; ``config`` replaces the default example data."""
    results = []
    if config is None:
        results.append(check_skew_identity(BUBBLE, PhysicsParams(1.0, 0.0, (1, 1), 24.0)))
        results.append(check_skew_identity(SINE, PhysicsParams(1.0, 0.0, (1, 1), 25.0)))
        care_cases = [(BUBBLE, PhysicsParams(1.0, 0.0, (1, 1), 24.0), "full", None)]
        v = (1.0, 1.0)
    else:
        p = config.physics
        results.append(check_skew_identity(config.ys, p, quad_order=config.quadrature_order))
        care_cases = []
        if config.control_enabled:
            care_cases.append((config.ys, p, config.control_region,
                               config.quadrature_order))
        v = p.v
    results.append(check_energy_identity(rng, v=v))
    results.append(check_jacobian(rng, v=v))
    results.append(check_scalar_care())
    for ys, p, region, q in care_cases:
        for k in (2, 3):
            results.append(check_care_residual(ys, p, k, region, q))
    return results
