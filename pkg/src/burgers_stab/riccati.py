"""Generalized algebraic Riccati equation of the semidiscrete closed loop.

For the shifted drift ``A_w = A + omega M`` the Riccati matrix ``P`` solves::

    P M^-1 A_w + A_w^T M^-1 P - P M^-1 B M^-1 B^T M^-1 P + M = 0,  P = P^T >= 0

and the feedback is ``u = -S P Z`` with ``M S = Bb^T`` and ``M Bb = B``.
With ``M = L L^T`` and ``P = L Pt L^T`` this is the standard CARE
``Pt Ah + Ah^T Pt - Pt Bh Bh^T Pt + I = 0`` with ``Ah = L^-1 A_w L^-T`` and
``Bh = L^-1 B L^-T``, which is solved by the ordered Schur method on the
Hamiltonian and polished by Newton-Kleinman steps.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .dense_linalg import cholesky, schur_real, solve_lyapunov
from .errors import ArgumentError, ConvergenceError, StabilizabilityError

__all__ = ["CareProblem", "CareSolution", "reduce_to_standard", "solve_care",
           "standard_residual", "generalized_residual", "solve_generalized_care",
           "feedback_apply", "certify_closed_loop", "closed_loop_matrix",
           "MAX_DEFAULT_LEVEL"]

log = logging.getLogger(__name__)

MAX_DEFAULT_LEVEL = 5


def _dense(mat):
    return mat.toarray() if hasattr(mat, "toarray") else np.asarray(mat, dtype=float)


@dataclass(frozen=True, eq=False)
class CareProblem:
    A_shift: np.ndarray
    M: np.ndarray
    B: np.ndarray
    level: int = 0
    K: np.ndarray = None          # only needed for the gradient margin

    def __post_init__(self):
        for name in ("A_shift", "M", "B"):
            object.__setattr__(self, name, _dense(getattr(self, name)))
        if self.K is not None:
            object.__setattr__(self, "K", _dense(self.K))
        n = self.M.shape[0]
        if any(getattr(self, f).shape != (n, n) for f in ("A_shift", "B")):
            raise ArgumentError("A_shift, M and B must be square of equal size")

    @classmethod
    def from_matrices(cls, matrices):
        return cls(matrices.A_shift, matrices.M, matrices.B,
                   level=matrices.mesh.k, K=matrices.K)


@dataclass(frozen=True, eq=False)
class CareSolution:
    P: np.ndarray
    S: np.ndarray
    relative_residual: float
    closed_loop_abscissa: float = np.nan
    omega_P: float = np.nan
    alpha: float = np.nan
    refinement_steps: int = 0

    @property
    def gain(self):
        """``S P``; the control is ``-gain @ Z``."""
        return self.S @ self.P


def reduce_to_standard(problem):
    """Return ``(Ah, Bh, L)``; recover ``P = L Pt L^T``."""
    L = cholesky(problem.M)

    def congruence(X):
        Y = sla.solve_triangular(L, X, lower=True)
        return sla.solve_triangular(L, Y.T, lower=True).T

    return congruence(problem.A_shift), congruence(problem.B), L


def standard_residual(Ah, Bh, Pt):
    G = Bh @ Bh.T
    return Pt @ Ah + Ah.T @ Pt - Pt @ G @ Pt + np.eye(len(Ah))


def _rel(R, n):
    return np.linalg.norm(R, "fro") / np.sqrt(n)


def solve_care(Ah, Bh, refine=True, tol=1e-11, require=1e-10, max_refine=8):
    """Stabilizing solution of ``Pt Ah + Ah^T Pt - Pt Bh Bh^T Pt + I = 0``.

    Returns ``(Pt, relative_residual, refinement_steps)``.  The relative
    residual is measured against ``||I||_F``.
    """
    Ah = np.atleast_2d(np.asarray(Ah, dtype=float))
    Bh = np.atleast_2d(np.asarray(Bh, dtype=float))
    n = Ah.shape[0]
    G = Bh @ Bh.T
    H = np.block([[Ah, -G], [-np.eye(n), -Ah.T]])
    schur = schur_real(H, sort="lhp")
    if schur.n_selected != n:
        raise StabilizabilityError(
            f"Hamiltonian has {schur.n_selected} stable eigenvalues, expected {n}")
    U11 = schur.Q[:n, :n]
    U21 = schur.Q[n:, :n]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu = sla.lu_factor(U11)
    if np.abs(np.diag(lu[0])).min() < 1e-14 * np.abs(np.diag(lu[0])).max():
        raise StabilizabilityError("U11 is singular: pair is not stabilizable")
    Pt = sla.lu_solve(lu, U21.T, trans=1).T          # U21 U11^-1
    Pt = 0.5 * (Pt + Pt.T)
    res = _rel(standard_residual(Ah, Bh, Pt), n)
    history = [res]
    steps = 0
    while refine and res > tol and steps < max_refine:
        Ak = Ah - G @ Pt
        try:
            cand = solve_lyapunov(Ak, np.eye(n) + Pt @ G @ Pt)
        except ArgumentError:
            break
        cand_res = _rel(standard_residual(Ah, Bh, cand), n)
        if not cand_res < res:
            break
        Pt, res = cand, cand_res
        history.append(res)
        steps += 1
    if res > require:
        raise ConvergenceError(f"CARE residual {res:.3e} above {require:.1e}",
                               history)
    return Pt, res, steps


def generalized_residual(problem, P):
    """Residual matrix of the mass-weighted Riccati equation."""
    c = sla.cho_factor(problem.M, lower=True)
    W = sla.cho_solve(c, P)                       # M^-1 P
    V = sla.cho_solve(c, problem.B.T) @ W         # M^-1 B^T M^-1 P
    lin = W.T @ problem.A_shift
    return lin + lin.T - W.T @ problem.B @ V + problem.M


def solve_generalized_care(problem, certify=True, require=1e-10, **kwargs):
    """Solve the mass-weighted Riccati equation and build the feedback.

    Raises ConvergenceError when the generalized residual, relative to
    ``||M||_F``, stays above ``require``.
    """
    Ah, Bh, L = reduce_to_standard(problem)
    Pt, std_res, steps = solve_care(Ah, Bh, require=np.inf, **kwargs)
    P = L @ Pt @ L.T
    P = 0.5 * (P + P.T)
    c = sla.cho_factor(problem.M, lower=True)
    Bb = sla.cho_solve(c, problem.B)
    S = sla.cho_solve(c, Bb.T)
    R = generalized_residual(problem, P)
    rel = np.linalg.norm(R, "fro") / np.linalg.norm(problem.M, "fro")
    if rel > require:
        raise ConvergenceError(
            f"generalized ARE residual {rel:.3e} above {require:.1e} "
            f"(standard form {std_res:.3e} after {steps} Newton-Kleinman steps)",
            [std_res, float(rel)])
    sol = CareSolution(P=P, S=S, relative_residual=float(rel),
                       refinement_steps=steps)
    if certify:
        abscissa, omega_P, alpha = certify_closed_loop(problem, sol)
        sol = CareSolution(P=P, S=S, relative_residual=float(rel),
                           closed_loop_abscissa=abscissa, omega_P=omega_P,
                           alpha=alpha, refinement_steps=steps)
    log.info("level %d: CARE residual %.2e, %d Newton-Kleinman steps",
             problem.level, rel, steps)
    return sol


def feedback_apply(solution, Z):
    """Feedback control ``u = -S P Z``."""
    Z = np.asarray(Z, dtype=float)
    if Z.shape != (solution.P.shape[0],):
        raise ArgumentError("state size does not match the Riccati solution")
    return -(solution.S @ (solution.P @ Z))


def closed_loop_matrix(problem, solution=None):
    if solution is None:
        return problem.A_shift
    return problem.A_shift - problem.B @ solution.gain


def certify_closed_loop(problem, solution=None, split=0.5):
    """Spectral abscissa, energy decay rate and gradient margin.

    ``omega_P = -lambda_max(Sym(C), M)`` is the decay rate of ``||Z||_M``
    for ``M Z' = C Z``.  ``alpha`` is the largest value with
    ``Sym(C) <= -split*omega_P M - alpha K``, i.e. the gradient margin left
    after reserving ``split*omega_P`` of the decay rate.
    """
    C = closed_loop_matrix(problem, solution)
    L = cholesky(problem.M)
    Ch = sla.solve_triangular(L, C, lower=True)
    Ch = sla.solve_triangular(L, Ch.T, lower=True).T
    abscissa = float(np.max(sla.eigvals(Ch).real))
    sym = 0.5 * (C + C.T)
    lam_max = float(sla.eigh(sym, problem.M, eigvals_only=True)[-1])
    omega_P = -lam_max
    alpha = np.nan
    if problem.K is not None:
        shifted = sym + split * omega_P * problem.M
        alpha = -float(sla.eigh(shifted, problem.K, eigvals_only=True)[-1])
    return abscissa, omega_P, alpha
