"""Dense kernels for the Riccati path.

LU, Cholesky and the (ordered) real Schur decomposition call LAPACK through
``scipy.linalg``; this module adds the error contract, eigenvalue extraction
from the quasi-triangular factor and a Bartels-Stewart Lyapunov solver.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ArgumentError, NumericalError

__all__ = ["SchurForm", "lu_solve", "cholesky", "schur_real",
           "schur_eigenvalues", "solve_lyapunov", "lyapunov_residual"]


def _square(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ArgumentError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ArgumentError(f"{name} has non-finite entries")
    return A


def lu_solve(A, rhs):
    """Solve ``A X = rhs`` by LU with partial pivoting."""
    A = _square(A)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=False)
    diag = np.abs(np.diag(lu))
    if diag.min() <= np.finfo(float).eps * max(diag.max(), 1.0) * A.shape[0]:
        raise NumericalError("matrix is singular to working precision")
    return sla.lu_solve((lu, piv), rhs, check_finite=False)


def cholesky(A):
    """Lower-triangular ``L`` with ``L L^T = A``."""
    A = _square(A)
    if not np.allclose(A, A.T, rtol=1e-12, atol=0.0):
        raise ArgumentError("matrix is not symmetric")
    try:
        return sla.cholesky(A, lower=True, check_finite=False)
    except sla.LinAlgError as exc:
        raise NumericalError(f"Cholesky failed: {exc}") from None


@dataclass(frozen=True, eq=False)
class SchurForm:
    Q: np.ndarray
    T: np.ndarray
    eigenvalues: np.ndarray
    n_selected: int = 0


def schur_eigenvalues(T, tol=0.0):
    """Read eigenvalues off the 1x1 and 2x2 diagonal blocks of ``T``."""
    n = T.shape[0]
    out = np.empty(n, dtype=complex)
    i = 0
    while i < n:
        if i + 1 < n and abs(T[i + 1, i]) > tol:
            a, b, c, d = T[i, i], T[i, i + 1], T[i + 1, i], T[i + 1, i + 1]
            mean = 0.5 * (a + d)
            disc = (0.5 * (a - d)) ** 2 + b * c
            root = np.sqrt(complex(disc))
            out[i], out[i + 1] = mean + root, mean - root
            i += 2
        else:
            out[i] = T[i, i]
            i += 1
    return out


def schur_real(A, sort=None):
    """Real Schur form ``A = Q T Q^T``.

    ``sort="lhp"`` moves the eigenvalues with negative real part to the
    leading block; ``n_selected`` then counts them.
    """
    A = _square(A)
    try:
        if sort is None:
            T, Q = sla.schur(A, output="real", check_finite=False)
            sdim = 0
        else:
            T, Q, sdim = sla.schur(A, output="real", sort=sort,
                                   check_finite=False)
    except (sla.LinAlgError, ValueError) as exc:
        raise NumericalError(f"QR iteration failed: {exc}") from None
    return SchurForm(Q, T, schur_eigenvalues(T), int(sdim))


def solve_lyapunov(A, Q):
    """Bartels-Stewart solution of ``A^T X + X A + Q = 0``.

    ``A`` is reduced to complex triangular form ``U T U^H``; the transformed
    equation ``T^H Y + Y T = -U^H Q U`` is solved one column at a time by
    forward substitution with the lower-triangular ``T^H + t_jj I``.
    """
    A = _square(A)
    Q = _square(Q, "Q")
    if A.shape != Q.shape:
        raise ArgumentError("A and Q sizes differ")
    T, U = sla.schur(A, output="complex", check_finite=False)
    lam = np.diag(T)
    if np.max(lam.real) >= 0.0:
        raise ArgumentError("A is not stable (eigenvalue with Re >= 0)")
    n = A.shape[0]
    C = U.conj().T @ Q @ U
    Y = np.zeros((n, n), dtype=complex)
    lower = np.asfortranarray(T.conj().T)
    diag = np.diag_indices(n)
    base = lower[diag].copy()
    for j in range(n):
        rhs = -C[:, j] - Y[:, :j] @ T[:j, j]
        lower[diag] = base + T[j, j]
        Y[:, j] = sla.solve_triangular(lower, rhs, lower=True,
                                       check_finite=False)
    X = (U @ Y @ U.conj().T).real
    return 0.5 * (X + X.T)


def lyapunov_residual(A, X, Q):
    return A.T @ X + X @ A + Q
