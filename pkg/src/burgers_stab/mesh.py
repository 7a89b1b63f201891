"""Nested uniform triangulations of the unit square and P1 utilities.

Vertex ``(i, j)`` sits at ``(i*h, j*h)`` and has global index ``j*(m+1) + i``
with ``m = 2**k``.  Each ``h x h`` cell is split along its lower-left to
upper-right diagonal::

    d-----c
    |   / |
    | /   |
    a-----b       triangles (a, b, c) and (a, c, d)

Interior vertices are numbered lexicographically by (row, column), i.e. by
``(j, i)``; these are the degrees of freedom of the homogeneous Dirichlet
P1 space.  Field values are plain ``numpy`` arrays of length ``n_dofs``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, ConfigurationError

__all__ = ["MeshLevel", "build_uniform_mesh", "eval_p1", "prolongate",
           "restrict_to_coarse", "interpolate", "dump_mesh", "MAX_LEVEL"]

MAX_LEVEL = 8


@dataclass(frozen=True, eq=False)
class MeshLevel:
    k: int
    vertices: np.ndarray        # (nv, 2)
    triangles: np.ndarray       # (nt, 3), counter-clockwise
    boundary: np.ndarray        # (nv,) bool
    dof_of_vertex: np.ndarray   # (nv,) int, -1 on the boundary
    vertex_of_dof: np.ndarray   # (n_dofs,) int
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def m(self):
        return 2 ** self.k

    @property
    def h(self):
        return 1.0 / self.m

    @property
    def n_dofs(self):
        return self.vertex_of_dof.size

    @property
    def dof_coords(self):
        return self.vertices[self.vertex_of_dof]

    def geometry(self):
        """Per-triangle areas and barycentric gradients (cached).

        Returns ``(area, grads)`` with ``grads[t, a]`` the constant gradient
        of the hat function attached to local vertex ``a`` of triangle ``t``.
        """
        if "geometry" not in self._cache:
            self._cache["geometry"] = _triangle_geometry(
                self.vertices[self.triangles])
        return self._cache["geometry"]

    def full(self, values):
        """Expand a DOF vector to all vertices (zero on the boundary)."""
        values = check_dofs(self, values)
        out = np.zeros(len(self.vertices))
        out[self.vertex_of_dof] = values
        return out


def _triangle_geometry(xy):
    e1 = xy[:, 1] - xy[:, 0]
    e2 = xy[:, 2] - xy[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    area = 0.5 * det
    # rows of inv(J)^T give grad(lambda_1), grad(lambda_2)
    g1 = np.stack([e2[:, 1], -e2[:, 0]], axis=1) / det[:, None]
    g2 = np.stack([-e1[:, 1], e1[:, 0]], axis=1) / det[:, None]
    g0 = -g1 - g2
    return area, np.stack([g0, g1, g2], axis=1)


def check_dofs(mesh, values):
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_dofs,):
        raise ArgumentError(
            f"vector of shape {values.shape} does not live on level {mesh.k} "
            f"({mesh.n_dofs} interior DOFs)")
    return values


def build_uniform_mesh(k):
    """Uniform level-``k`` mesh of [0,1]^2 with ``2 * 4**k`` triangles."""
    if isinstance(k, bool) or int(k) != k or not 1 <= k <= MAX_LEVEL:
        raise ConfigurationError(f"mesh level must be in 1..{MAX_LEVEL}, got {k}")
    k = int(k)
    m = 2 ** k
    h = 1.0 / m
    jj, ii = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    vertices = np.stack([ii * h, jj * h], axis=1)
    boundary = (ii == 0) | (ii == m) | (jj == 0) | (jj == m)

    ci, cj = np.meshgrid(np.arange(m), np.arange(m), indexing="xy")
    a = (cj * (m + 1) + ci).ravel()
    b = a + 1
    c = a + m + 2
    d = a + m + 1
    triangles = np.empty((2 * m * m, 3), dtype=np.int64)
    triangles[0::2] = np.stack([a, b, c], axis=1)
    triangles[1::2] = np.stack([a, c, d], axis=1)

    vertex_of_dof = np.flatnonzero(~boundary)
    dof_of_vertex = np.full(len(vertices), -1, dtype=np.int64)
    dof_of_vertex[vertex_of_dof] = np.arange(vertex_of_dof.size)
    return MeshLevel(k, vertices, triangles, boundary, dof_of_vertex,
                     vertex_of_dof)


def _locate(mesh, points):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[-1] != 2:
        raise ArgumentError("points must have two coordinates")
    if np.any(points < 0.0) or np.any(points > 1.0):
        raise ArgumentError("point outside the unit square")
    m = mesh.m
    s = points[:, 0] * m
    t = points[:, 1] * m
    i = np.minimum(np.floor(s).astype(np.int64), m - 1)
    j = np.minimum(np.floor(t).astype(np.int64), m - 1)
    return points, i, j, s - i, t - j


def _eval_nodal(mesh, nodal, points):
    _, i, j, s, t = _locate(mesh, points)
    m = mesh.m
    va = nodal[j * (m + 1) + i]
    vb = nodal[j * (m + 1) + i + 1]
    vc = nodal[(j + 1) * (m + 1) + i + 1]
    vd = nodal[(j + 1) * (m + 1) + i]
    lower = s >= t
    return np.where(lower,
                    va * (1 - s) + vb * (s - t) + vc * t,
                    va * (1 - t) + vc * s + vd * (t - s))


def eval_p1(values, mesh, point):
    """Evaluate the P1 function with DOF ``values`` at ``point``.

    ``point`` may be a single pair or an ``(n, 2)`` array; the result is a
    float or an array accordingly.
    """
    out = _eval_nodal(mesh, mesh.full(values), point)
    return float(out[0]) if np.ndim(point) == 1 else out


def interpolate(mesh, func):
    """Nodal interpolant at interior vertices; ``func(x1, x2)`` is vectorized."""
    xy = mesh.dof_coords
    return np.asarray(func(xy[:, 0], xy[:, 1]), dtype=float) * np.ones(len(xy))


def prolongate(coarse, fine_mesh, coarse_mesh=None):
    """Inject a level-k P1 function into the nested level-(k+1) space."""
    if coarse_mesh is None:
        if fine_mesh.k < 2:
            raise ArgumentError("level-1 mesh has no coarser level")
        coarse_mesh = build_uniform_mesh(fine_mesh.k - 1)
    if coarse_mesh.k != fine_mesh.k - 1:
        raise ArgumentError(
            f"cannot prolongate from level {coarse_mesh.k} to {fine_mesh.k}")
    nodal = coarse_mesh.full(coarse)
    return _eval_nodal(coarse_mesh, nodal, fine_mesh.dof_coords)


def restrict_to_coarse(fine, fine_mesh, coarse_mesh):
    """Pick the values of a fine field at the coarse interior vertices."""
    if coarse_mesh.k != fine_mesh.k - 1:
        raise ArgumentError("meshes are not consecutive levels")
    nodal = fine_mesh.full(fine)
    m = coarse_mesh.m
    cv = coarse_mesh.vertex_of_dof
    ci, cj = cv % (m + 1), cv // (m + 1)
    return nodal[2 * cj * (2 * m + 1) + 2 * ci]


def dump_mesh(mesh, stream):
    """Write the plain-text mesh dump: count, ``x y flag`` lines, ``i j k`` lines."""
    stream.write(f"{len(mesh.vertices)}\n")
    for (x, y), flag in zip(mesh.vertices, mesh.boundary):
        stream.write(f"{float(x)!r} {float(y)!r} {int(flag)}\n")
    for tri in mesh.triangles:
        stream.write("{} {} {}\n".format(*tri))
