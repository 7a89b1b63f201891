"""Implicit time integration of the shifted semidiscrete systems.

The first step is backward Euler, later steps are BDF2::

    (M - dt C) Z1 = M Z0
    (1.5 M - dt C) Z[n+1] = 2 M Z[n] - 0.5 M Z[n-1]

with ``C = A + omega M`` (open loop) or ``C = A + omega M - B S P`` (closed
loop).  The nonlinear system adds ``- dt exp(-omega t) N(Z) Z`` on the left
and solves each step with Newton's method.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ArgumentError, ConfigurationError, ConvergenceError, NumericalError
from .fem import assemble_nonlinear, assemble_nonlinear_jacobian, load_vector
from .mesh import check_dofs
from .riccati import feedback_apply

__all__ = ["TimeGrid", "Trajectory", "NewtonConfig", "simulate_linear",
           "simulate_nonlinear", "unshift", "write_norm_history"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on ``[0, T]``; ``dt`` is shrunk so that it divides ``T``."""

    dt: float
    T: float
    steps: int

    @classmethod
    def from_target(cls, dt_target, T):
        if not (dt_target > 0 and T > 0):
            raise ConfigurationError("dt and T must be positive")
        steps = max(1, math.ceil(T / dt_target - 1e-9))
        return cls(T / steps, float(T), steps)

    @property
    def times(self):
        return self.dt * np.arange(self.steps + 1)


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-10
    max_iter: int = 25

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigurationError("Newton tolerance must be positive")


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray           # (steps + 1, n)
    controls: np.ndarray         # (steps + 1, n)
    l2_norms: np.ndarray
    h1_norms: np.ndarray
    control_l2: np.ndarray
    newton_iterations: List[int] = field(default_factory=list)
    newton_residuals: List[List[float]] = field(default_factory=list)
    matrices: object = None

    @property
    def mesh(self):
        return None if self.matrices is None else self.matrices.mesh

    def index_at(self, t, dt=None):
        """Index of the stored level nearest to ``t`` (within half a step)."""
        i = int(np.argmin(np.abs(self.times - t)))
        if dt is None:
            dt = self.times[1] - self.times[0] if len(self.times) > 1 else 0.0
        if abs(self.times[i] - t) > 0.5 * dt + 1e-12:
            raise ArgumentError(f"no stored time level near t={t}")
        return i


def _norm_rows(matrices, states):
    l2 = np.sqrt(np.maximum(np.einsum("ij,ij->i", states, (matrices.M @ states.T).T), 0))
    kk = np.einsum("ij,ij->i", states, (matrices.K @ states.T).T)
    h1 = np.sqrt(np.maximum(l2 ** 2 + kk, 0))
    return l2, h1


def _finish(matrices, grid, states, controls, iters=(), residuals=()):
    states = np.asarray(states)
    controls = np.asarray(controls)
    l2, h1 = _norm_rows(matrices, states)
    cl2, _ = _norm_rows(matrices, controls)
    return Trajectory(grid.times, states, controls, l2, h1, cl2,
                      list(iters), list(residuals), matrices)


def _drift(matrices, gain):
    C = matrices.A_shift
    if gain is None:
        return C
    return C.toarray() - matrices.B @ gain.gain


class _Factorized:
    """LU of ``c0 M - dt C`` for sparse or dense ``C``."""

    def __init__(self, c0, M, C, dt):
        if sp.issparse(C):
            self._lu = spla.splu((c0 * M - dt * C).tocsc())
            self.solve = self._lu.solve
        else:
            mat = c0 * M.toarray() - dt * C
            lu = sla.lu_factor(mat, check_finite=False)
            d = np.abs(np.diag(lu[0]))
            if d.min() <= 1e-14 * d.max():
                raise NumericalError("implicit matrix is singular")
            self.solve = lambda b: sla.lu_solve(lu, b, check_finite=False)


def _controls(gain, states):
    if gain is None:
        return np.zeros_like(states)
    return np.array([feedback_apply(gain, z) for z in states])


def simulate_linear(matrices, params=None, gain=None, z0=None, grid=None):
    """Linear shifted system, open or closed loop (``gain`` a CareSolution)."""
    z0 = check_dofs(matrices.mesh, z0)
    M = matrices.M
    C = _drift(matrices, gain)
    dt = grid.dt
    states = [z0.copy()]
    euler = _Factorized(1.0, M, C, dt)
    states.append(euler.solve(M @ states[-1]))
    if grid.steps > 1:
        bdf2 = _Factorized(1.5, M, C, dt)
        for _ in range(grid.steps - 1):
            rhs = M @ (2.0 * states[-1] - 0.5 * states[-2])
            states.append(bdf2.solve(rhs))
    states = np.array(states[:grid.steps + 1])
    return _finish(matrices, grid, states, _controls(gain, states))


def _newton_step(matrices, lhs, rhs_fn, z_guess, t_new, dt, weight, newton):
    """Solve ``lhs Z + dt*weight*N(Z) - rhs = 0`` starting from ``z_guess``."""
    mesh = matrices.mesh
    v = matrices.params.v
    dense = not sp.issparse(lhs)
    rhs = rhs_fn
    z = z_guess.copy()
    history = []

    def residual(z):
        return lhs @ z + dt * weight * assemble_nonlinear(mesh, z, v) - rhs

    F = residual(z)
    history.append(float(np.linalg.norm(F)))
    for it in range(1, newton.max_iter + 1):
        J = assemble_nonlinear_jacobian(mesh, z, v)
        if dense:
            G = lhs + dt * weight * J.toarray()
            try:
                d = sla.solve(G, -F, check_finite=False)
            except sla.LinAlgError as exc:
                raise NumericalError(f"singular Newton matrix: {exc}") from None
        else:
            G = (lhs + dt * weight * J).tocsc()
            d = spla.spsolve(G, -F)
        z = z + d
        F = residual(z)
        history.append(float(np.linalg.norm(F)))
        if history[-1] <= newton.tol or np.linalg.norm(d) <= 1e-15 * max(np.linalg.norm(z), 1e-300):
            return z, it, history
    raise ConvergenceError(
        f"Newton did not converge at t={t_new:.6g} after {newton.max_iter} iterations",
        history)


def simulate_nonlinear(matrices, params=None, gain=None, z0=None, grid=None,
                       forcing=None, newton=None, quad_order=8):
    """Nonlinear shifted system with optional feedback and forcing ``g(x, t)``.

    Each step solves
    ``(c0 M - dt C) Z + dt e^{-omega t} N(Z) Z = rhs + dt <g(t), phi>``
    by Newton's method started from the previous level.
    """
    params = params or matrices.params
    newton = newton or NewtonConfig()
    z0 = check_dofs(matrices.mesh, z0)
    M = matrices.M
    C = _drift(matrices, gain)
    dt = grid.dt
    lhs_be = (M - dt * C) if sp.issparse(C) else (M.toarray() - dt * C)
    lhs_bdf = (1.5 * M - dt * C) if sp.issparse(C) else (1.5 * M.toarray() - dt * C)
    if sp.issparse(C):
        lhs_be, lhs_bdf = lhs_be.tocsr(), lhs_bdf.tocsr()

    states = [z0.copy()]
    iters, residuals = [], []
    for n in range(grid.steps):
        t_new = (n + 1) * dt
        if n == 0:
            lhs, rhs = lhs_be, M @ states[-1]
        else:
            lhs, rhs = lhs_bdf, M @ (2.0 * states[-1] - 0.5 * states[-2])
        if forcing is not None:
            rhs = rhs + dt * load_vector(matrices.mesh, forcing, t_new, quad_order)
        weight = math.exp(-params.omega * t_new)
        z, it, hist = _newton_step(matrices, lhs, rhs, states[-1], t_new, dt,
                                   weight, newton)
        states.append(z)
        iters.append(it)
        residuals.append(hist)
    states = np.array(states)
    return _finish(matrices, grid, states, _controls(gain, states), iters, residuals)


def unshift(traj, params, y_s=None):
    """Physical variables ``y = e^{-wt} z~ + Y_s`` and ``u = e^{-wt} u~``."""
    decay = np.exp(-params.omega * traj.times)[:, None]
    states = decay * traj.states
    if y_s is not None:
        states = states + np.asarray(y_s, dtype=float)[None, :]
    controls = decay * traj.controls
    if traj.matrices is None:
        raise ArgumentError("trajectory carries no matrices to measure norms")
    grid = TimeGrid(traj.times[1] - traj.times[0] if len(traj.times) > 1 else 0.0,
                    float(traj.times[-1]), len(traj.times) - 1)
    out = _finish(traj.matrices, grid, states, controls,
                  traj.newton_iterations, traj.newton_residuals)
    out.times = traj.times.copy()
    return out


def write_norm_history(traj, stream, physical=None):
    """Emit one JSON record per time level: ``t, l2, h1, control_l2``."""
    for i, t in enumerate(traj.times):
        rec = {"t": float(t), "l2": float(traj.l2_norms[i]),
               "h1": float(traj.h1_norms[i]),
               "control_l2": float(traj.control_l2[i])}
        if physical is not None:
            rec["l2_physical"] = float(physical.l2_norms[i])
            rec["h1_physical"] = float(physical.h1_norms[i])
        stream.write(json.dumps(rec) + "\n")
