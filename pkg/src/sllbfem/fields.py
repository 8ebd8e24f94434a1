"""Vector-valued P1 finite element fields and the operators acting on them.

A field holds one R^3 coefficient triple per mesh vertex.  The module
provides the L2 projection, the zero-mean Ritz projection, the discrete
(Neumann) Laplacian defined by <Lap_h v, chi> = -<grad v, grad chi>, the
L2/H1 norms, and exact prolongation to a finer nested mesh.
"""

import weakref

import numpy as np
from scipy.sparse.linalg import splu

from . import assembly
from .mesh import Mesh, prolongation_map


class FeField:
    """Piecewise-linear R^3-valued function given by nodal coefficients."""

    def __init__(self, mesh: Mesh, coeffs):
        coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
        if coeffs.shape != (mesh.n_vertices, 3):
            raise ValueError(
                f"coefficients must have shape ({mesh.n_vertices}, 3)")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("coefficients contain non-finite values")
        self.mesh = mesh
        self.coeffs = coeffs

    @classmethod
    def zeros(cls, mesh):
        return cls(mesh, np.zeros((mesh.n_vertices, 3)))

    @classmethod
    def interpolate(cls, mesh, fn):
        """Nodal interpolant of a vectorised callable (n, dim) -> (n, 3)."""
        vals = np.asarray(fn(mesh.vertices), dtype=np.float64)
        return cls(mesh, vals)

    def copy(self):
        return FeField(self.mesh, self.coeffs.copy())

    def max_pointwise_norm(self):
        """Max over vertices of |u_i|; bounds |u(x)| everywhere for P1."""
        return float(np.sqrt((self.coeffs ** 2).sum(axis=1)).max())


class _Operators:
    """Cached per-mesh operators and factorizations."""

    def __init__(self, mesh):
        self.mass = assembly.assemble_mass(mesh)
        self.stiffness = assembly.assemble_stiffness(mesh)
        self.mass_row_sums = np.asarray(self.mass.mat.sum(axis=1)).ravel()
        self._mass_lu = None
        self._pinned_stiffness_lu = None

    def mass_lu(self):
        if self._mass_lu is None:
            self._mass_lu = splu(self.mass.mat.tocsc())
        return self._mass_lu

    def pinned_stiffness_lu(self):
        # K is singular (constants); pin the first degree of freedom
        if self._pinned_stiffness_lu is None:
            k = self.stiffness.mat.tolil()
            k[0, :] = 0.0
            k[0, 0] = 1.0
            self._pinned_stiffness_lu = splu(k.tocsc())
        return self._pinned_stiffness_lu


_OPERATORS = weakref.WeakKeyDictionary()


def operators(mesh: Mesh) -> _Operators:
    ops = _OPERATORS.get(mesh)
    if ops is None:
        ops = _Operators(mesh)
        _OPERATORS[mesh] = ops
    return ops


def l2_project(mesh: Mesh, target) -> FeField:
    """L2-orthogonal projection onto the P1 space of ``mesh``.

    ``target`` is a vectorised callable, a field on the same mesh, or a
    field on a finer nested mesh (then the projection is computed exactly
    through the fine mass matrix).
    """
    ops = operators(mesh)
    if isinstance(target, FeField) and target.mesh is not mesh:
        pmat = prolongation_map(mesh, target.mesh).matrix()
        rhs = pmat.T @ (operators(target.mesh).mass.mat @ target.coeffs)
    else:
        rhs = assembly.assemble_load(mesh, target)
    return FeField(mesh, ops.mass_lu().solve(rhs))


def ritz_project(mesh: Mesh, target, target_grad=None) -> FeField:
    """Gradient-orthogonal projection with matching mean value.

    The projection q satisfies <grad q - grad v, grad chi> = 0 for all hat
    functions chi and int q = int v componentwise.  For a callable target
    its gradient must be supplied as a callable (n, dim) -> (n, 3, dim);
    a field on a finer nested mesh needs no extra data.
    """
    ops = operators(mesh)
    md = assembly.mesh_data(mesh)
    if isinstance(target, FeField):
        if target.mesh is mesh:
            return target.copy()
        fine_ops = operators(target.mesh)
        pmat = prolongation_map(mesh, target.mesh).matrix()
        rhs = pmat.T @ (fine_ops.stiffness.mat @ target.coeffs)
        target_int = fine_ops.mass_row_sums @ target.coeffs
    else:
        if target_grad is None:
            raise ValueError("callable target requires target_grad")
        pts = md.quad_points.reshape(-1, mesh.dim)
        grads = np.asarray(target_grad(pts)).reshape(
            mesh.n_cells, md.nq, 3, mesh.dim)
        # b[(l, a)] = int grad(target)_a . grad(phi_l)
        contrib = np.einsum("cq,cqad,cld->cla", md.weights, grads, md.grads)
        rhs = np.zeros((mesh.n_vertices, 3))
        np.add.at(rhs, mesh.cells, contrib)
        vals = np.asarray(target(pts)).reshape(mesh.n_cells, md.nq, 3)
        target_int = np.einsum("cq,cqa->a", md.weights, vals)
    rhs = np.asarray(rhs)
    rhs[0, :] = 0.0
    coeffs = ops.pinned_stiffness_lu().solve(rhs)
    volume = ops.mass_row_sums.sum()
    coeffs += (target_int - ops.mass_row_sums @ coeffs) / volume
    return FeField(mesh, coeffs)


def discrete_laplacian(v: FeField) -> FeField:
    """Field w with <w, chi> = -<grad v, grad chi> for all hat functions."""
    ops = operators(v.mesh)
    return FeField(v.mesh, ops.mass_lu().solve(-(ops.stiffness.mat @ v.coeffs)))


def norm(v: FeField, s: int) -> float:
    """L2 norm (s=0) or full H1 norm (s=1) of a field."""
    if s not in (0, 1):
        raise ValueError("s must be 0 or 1")
    ops = operators(v.mesh)
    total = float(np.sum(v.coeffs * (ops.mass.mat @ v.coeffs)))
    if s == 1:
        total += float(np.sum(v.coeffs * (ops.stiffness.mat @ v.coeffs)))
    return np.sqrt(total)


def prolong(v: FeField, fine: Mesh) -> FeField:
    """Exact representation of ``v`` on a finer nested mesh."""
    pmap = prolongation_map(v.mesh, fine)
    return FeField(fine, pmap.apply(v.coeffs))


def export_csv(v: FeField, path):
    """Write nodal values as CSV with columns x[, y], u1, u2, u3."""
    header = ("x,u1,u2,u3" if v.mesh.dim == 1 else "x,y,u1,u2,u3")
    data = np.hstack([v.mesh.vertices, v.coeffs])
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in data:
            fh.write(",".join("%.17g" % x for x in row) + "\n")
