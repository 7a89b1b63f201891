"""P1 finite element assembly on the interior DOFs of a :class:`MeshLevel`.

Row index = test function, column index = trial function, so that for a
coefficient vector ``Z`` the product ``A1 @ Z`` is the load
``(<y_s v.grad z_h, phi_k>)_k``.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import field_expr as fe
from .errors import ConfigurationError, NumericalError
from .mesh import check_dofs
from .quadrature import physical_points, triangle_rule

__all__ = ["PhysicsParams", "SystemMatrices", "assemble_static",
           "local_element_matrices", "assemble_nonlinear",
           "assemble_nonlinear_jacobian", "l2_project", "load_vector",
           "discrete_norms", "default_quadrature_order", "write_matrix_market"]

_LOCAL_MASS = (np.ones((3, 3)) + np.eye(3)) / 12.0


@dataclass(frozen=True)
class PhysicsParams:
    eta: float
    nu0: float = 0.0
    v: Tuple[float, float] = (1.0, 1.0)
    omega: float = 0.0

    def __post_init__(self):
        if not self.eta > 0:
            raise ConfigurationError(f"viscosity eta must be positive, got {self.eta}")
        if self.omega < 0:
            raise ConfigurationError(f"shift omega must be >= 0, got {self.omega}")
        object.__setattr__(self, "v", tuple(float(c) for c in self.v))
        if len(self.v) != 2:
            raise ConfigurationError("v must have two components")


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    """Sparse CSR matrices over the interior DOFs of one mesh level."""

    mesh: object
    params: PhysicsParams
    M: sp.csr_matrix
    K: sp.csr_matrix
    A1: sp.csr_matrix
    A2: sp.csr_matrix
    B: sp.csr_matrix
    quad_order: int

    @property
    def A(self):
        """Drift ``-eta K - A1 - A2 - nu0 M``."""
        p = self.params
        return (-p.eta * self.K - self.A1 - self.A2 - p.nu0 * self.M).tocsr()

    @property
    def A_shift(self):
        return (self.A + self.params.omega * self.M).tocsr()

    @property
    def n(self):
        return self.M.shape[0]


Region = Union[str, Sequence[float], None]


def default_quadrature_order(y_s):
    """6 for polynomial steady states, 8 once sin/cos/exp appear."""
    return 8 if y_s.uses_transcendental() else 6


def local_element_matrices(xy):
    """Local P1 mass and stiffness of the triangle with corners ``xy`` (3x2)."""
    xy = np.asarray(xy, dtype=float).reshape(1, 3, 2)
    from .mesh import _triangle_geometry
    area, grads = _triangle_geometry(xy)
    if not area[0] > 0:
        raise NumericalError("degenerate or clockwise triangle")
    mass = area[0] * _LOCAL_MASS
    stiff = area[0] * grads[0] @ grads[0].T
    return mass, stiff


def _scatter(mesh, local):
    """Sum ``(nt, 3, 3)`` local blocks into a CSR matrix over interior DOFs."""
    key = "scatter"
    if key not in mesh._cache:
        dofs = mesh.dof_of_vertex[mesh.triangles]          # (nt, 3)
        rows = np.repeat(dofs[:, :, None], 3, axis=2)
        cols = np.repeat(dofs[:, None, :], 3, axis=1)
        keep = ((rows >= 0) & (cols >= 0)).ravel()
        mesh._cache[key] = (rows.ravel()[keep], cols.ravel()[keep], keep)
    rows, cols, keep = mesh._cache[key]
    n = mesh.n_dofs
    mat = sp.coo_matrix((local.ravel()[keep], (rows, cols)), shape=(n, n))
    return mat.tocsr()


def _scatter_vector(mesh, local):
    dofs = mesh.dof_of_vertex[mesh.triangles].ravel()
    keep = dofs >= 0
    return np.bincount(dofs[keep], weights=local.ravel()[keep],
                       minlength=mesh.n_dofs)


def _centroid_mask(mesh, region):
    if region is None:
        return np.zeros(len(mesh.triangles), dtype=bool)
    if isinstance(region, str):
        if region != "full":
            raise ConfigurationError(f"unknown control region {region!r}")
        return np.ones(len(mesh.triangles), dtype=bool)
    x1a, x1b, x2a, x2b = (float(c) for c in region)
    cen = mesh.vertices[mesh.triangles].mean(axis=1)
    return ((cen[:, 0] >= x1a) & (cen[:, 0] <= x1b)
            & (cen[:, 1] >= x2a) & (cen[:, 1] <= x2b))


def assemble_static(mesh, params, y_s, control_region: Region = "full",
                    quad_order: Optional[int] = None):
    """Assemble ``M, K, A1, A2, B`` for the linearisation about ``y_s``.

    ``control_region`` is ``"full"``, ``None`` (no control) or a rectangle
    ``(x1a, x1b, x2a, x2b)``; a triangle belongs to the control region when
    its centroid does.
    """
    if quad_order is None:
        quad_order = default_quadrature_order(y_s)
    area, grads = mesh.geometry()
    v = np.asarray(params.v)

    mass = area[:, None, None] * _LOCAL_MASS
    stiff = area[:, None, None] * np.einsum("tad,tbd->tab", grads, grads)

    bary, w = triangle_rule(quad_order)
    pts = physical_points(mesh, quad_order)
    x1, x2 = pts[..., 0], pts[..., 1]
    ys_q = fe.evaluate(y_s, x1, x2, 0.0) * np.ones_like(x1)
    d1, d2 = fe.gradient(y_s)
    vgrad_ys = (v[0] * fe.evaluate(d1, x1, x2, 0.0)
                + v[1] * fe.evaluate(d2, x1, x2, 0.0)) * np.ones_like(x1)

    # A1[k, i] = (v.grad phi_i) * int y_s phi_k
    ys_moment = area[:, None] * ((ys_q * w) @ bary)           # (nt, 3)
    vgrad_phi = grads @ v                                      # (nt, 3)
    a1 = ys_moment[:, :, None] * vgrad_phi[:, None, :]
    # A2[k, i] = int (v.grad y_s) phi_i phi_k
    a2 = area[:, None, None] * np.einsum("tq,q,qa,qb->tab", vgrad_ys, w, bary, bary)

    inside = _centroid_mask(mesh, control_region)
    return SystemMatrices(
        mesh=mesh, params=params,
        M=_scatter(mesh, mass), K=_scatter(mesh, stiff),
        A1=_scatter(mesh, a1), A2=_scatter(mesh, a2),
        B=_scatter(mesh, mass * inside[:, None, None]),
        quad_order=quad_order)


def _local_states(mesh, Z):
    nodal = mesh.full(Z)
    return nodal[mesh.triangles]                                 # (nt, 3)


def assemble_nonlinear(mesh, Z, v):
    """Convective vector ``N_k = <z_h v.grad z_h, phi_k>``.

    ``v.grad z_h`` is constant on each triangle, so the local contribution is
    that constant times the local mass matrix applied to ``z``; exact.
    """
    Z = check_dofs(mesh, Z)
    area, grads = mesh.geometry()
    zl = _local_states(mesh, Z)
    vg = np.einsum("ta,tad,d->t", zl, grads, np.asarray(v, dtype=float))
    mz = area[:, None] * (zl @ _LOCAL_MASS)
    return _scatter_vector(mesh, vg[:, None] * mz)


def assemble_nonlinear_jacobian(mesh, Z, v):
    """Jacobian ``dN_k/dz_l`` of :func:`assemble_nonlinear` (sparse CSR)."""
    Z = check_dofs(mesh, Z)
    area, grads = mesh.geometry()
    v = np.asarray(v, dtype=float)
    zl = _local_states(mesh, Z)
    vgrad_phi = grads @ v                                        # (nt, 3)
    vg = np.einsum("ta,ta->t", zl, vgrad_phi)
    mz = area[:, None] * (zl @ _LOCAL_MASS)
    local = (mz[:, :, None] * vgrad_phi[:, None, :]
             + (vg * area)[:, None, None] * _LOCAL_MASS)
    return _scatter(mesh, local)


def load_vector(mesh, f, t=0.0, order=8):
    """``(<f(., t), phi_k>)_k`` by triangle quadrature."""
    area, _ = mesh.geometry()
    bary, w = triangle_rule(order)
    pts = physical_points(mesh, order)
    fq = fe.evaluate(f, pts[..., 0], pts[..., 1], t) * np.ones(pts.shape[:2])
    return _scatter_vector(mesh, area[:, None] * ((fq * w) @ bary))


def _mass_factor(mesh):
    if "mass_lu" not in mesh._cache:
        area, _ = mesh.geometry()
        M = _scatter(mesh, area[:, None, None] * _LOCAL_MASS)
        mesh._cache["mass_lu"] = spla.splu(M.tocsc())
    return mesh._cache["mass_lu"]


def l2_project(mesh, f, t=0.0, order=8):
    """Coefficients of the L2 projection of ``f(., t)`` onto the P1 space."""
    return _mass_factor(mesh).solve(load_vector(mesh, f, t, order))


def discrete_norms(matrices, Z):
    """``(sqrt(Z'MZ), sqrt(Z'MZ + Z'KZ))``."""
    Z = check_dofs(matrices.mesh, Z)
    m = float(Z @ (matrices.M @ Z))
    k = float(Z @ (matrices.K @ Z))
    return np.sqrt(max(m, 0.0)), np.sqrt(max(m + k, 0.0))


def write_matrix_market(path, mat):
    """Write ``mat`` in coordinate format with a 'general' header."""
    coo = sp.coo_matrix(mat)
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        order = np.lexsort((coo.col, coo.row))
        for r, c, x in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r + 1} {c + 1} {float(x)!r}\n")
