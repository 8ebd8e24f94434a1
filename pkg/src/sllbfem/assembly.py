"""P1 operator and load assembly on the structured mesh families.

Mass and stiffness matrices use exact closed-form element matrices.  Load
vectors and all state-dependent matrices integrate with a 4-point
Gauss-Legendre rule per interval and a 6-point degree-4 rule per triangle:
the cubic double-well force times a P1 test function and the quartic energy
integrand are then integrated exactly.  Nonlinear integrands are always
evaluated at quadrature points through the P1 basis, never interpolated at
the nodes.
"""

import weakref
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import kernels
from .mesh import Mesh


@dataclass(frozen=True)
class QuadratureRule:
    """Reference-cell rule: barycentric points and weights.

    The weights sum to the reference cell measure (1 for the unit interval,
    1/2 for the unit right triangle), so physical weights are obtained by
    scaling with the Jacobian determinant of the affine cell map.
    """

    points: np.ndarray   # (nq, nloc) barycentric coordinates
    weights: np.ndarray  # (nq,)


def interval_rule():
    """4-point Gauss-Legendre on [0, 1], exact through degree 7."""
    x, w = np.polynomial.legendre.leggauss(4)
    t = 0.5 * (x + 1.0)
    bary = np.column_stack([1.0 - t, t])
    return QuadratureRule(bary, 0.5 * w)


def triangle_rule():
    """6-point rule on the reference triangle, exact through degree 4."""
    a1, w1 = 0.445948490915965, 0.223381589678011
    a2, w2 = 0.091576213509771, 0.109951743655322
    pts = []
    wts = []
    for a, w in ((a1, w1), (a2, w2)):
        b = 1.0 - 2.0 * a
        pts += [(a, a, b), (a, b, a), (b, a, a)]
        wts += [w, w, w]
    return QuadratureRule(np.array(pts), 0.5 * np.array(wts))


class MeshData:
    """Per-mesh geometric data needed by quadrature-based assembly."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.rule = interval_rule() if mesh.dim == 1 else triangle_rule()
        self.basis = np.ascontiguousarray(self.rule.points)  # P1 basis == barycentric
        nq = self.basis.shape[0]
        p = mesh.vertices[mesh.cells]  # (nc, nloc, dim)
        # |det J| of the map from the reference cell (measure 1 resp. 1/2)
        if mesh.dim == 1:
            detj = mesh.cell_measures
            grads = np.empty((mesh.n_cells, 2, 1))
            h = p[:, 1, 0] - p[:, 0, 0]
            grads[:, 0, 0] = -1.0 / h
            grads[:, 1, 0] = 1.0 / h
        else:
            detj = 2.0 * mesh.cell_measures
            e1 = p[:, 1] - p[:, 0]
            e2 = p[:, 2] - p[:, 0]
            det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
            # grad of barycentric l1, l2 = rows of J^{-T}; l0 = -(l1 + l2)
            g1 = np.column_stack([e2[:, 1], -e2[:, 0]]) / det[:, None]
            g2 = np.column_stack([-e1[:, 1], e1[:, 0]]) / det[:, None]
            grads = np.stack([-(g1 + g2), g1, g2], axis=1)
        self.grads = grads                                    # (nc, nloc, dim)
        self.weights = np.ascontiguousarray(
            self.rule.weights[None, :] * detj[:, None])       # (nc, nq)
        self.quad_points = np.einsum("ql,cld->cqd", self.basis, p)  # (nc, nq, dim)
        self.nq = nq
        self._cross_pattern = None

    def cross_pattern(self):
        """COO indices of the 6 nonzero entries of each 3x3 cross block.

        For the matrix of v -> w x v in interleaved (node-major) ordering:
        entry (3i+a, 3j+c) carries sign * w_b with the Levi-Civita triples
        below.  Shapes are (nc, nl, nl, 6).
        """
        if self._cross_pattern is None:
            a = np.array([0, 0, 1, 1, 2, 2])
            c = np.array([1, 2, 0, 2, 0, 1])
            b = np.array([2, 1, 2, 0, 1, 0])
            sign = np.array([-1.0, 1.0, 1.0, -1.0, -1.0, 1.0])
            cells = self.mesh.cells
            rows = 3 * cells[:, :, None, None] + a  # (nc, nl, 1, 6) -> broadcast
            rows = np.broadcast_to(rows, rows.shape[:1] + (cells.shape[1],) * 2 + (6,))
            cols = 3 * cells[:, None, :, None] + c
            cols = np.broadcast_to(cols, rows.shape)
            self._cross_pattern = (np.ascontiguousarray(rows.ravel()),
                                   np.ascontiguousarray(cols.ravel()),
                                   b, sign)
        return self._cross_pattern


_MESH_DATA = weakref.WeakKeyDictionary()


def mesh_data(mesh: Mesh) -> MeshData:
    """Cached :class:`MeshData` for a mesh (meshes are immutable)."""
    data = _MESH_DATA.get(mesh)
    if data is None:
        data = MeshData(mesh)
        _MESH_DATA[mesh] = data
    return data


class SparseOperator:
    """Assembled bilinear form in CSR storage."""

    def __init__(self, mat, symmetric=False):
        self.mat = mat.tocsr()
        self.symmetric = symmetric

    @property
    def n_rows(self):
        return self.mat.shape[0]

    @property
    def n_cols(self):
        return self.mat.shape[1]

    def __matmul__(self, other):
        return self.mat @ other

    def toarray(self):
        return self.mat.toarray()


def _scatter(mesh, element_matrices, symmetric):
    nloc = mesh.cells.shape[1]
    rows = np.repeat(mesh.cells, nloc, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, nloc)).ravel()
    mat = sparse.coo_matrix(
        (element_matrices.ravel(), (rows, cols)),
        shape=(mesh.n_vertices, mesh.n_vertices))
    return SparseOperator(mat, symmetric=symmetric)


def assemble_mass(mesh: Mesh) -> SparseOperator:
    """Consistent mass matrix M_ij = int phi_i phi_j dx (scalar hats)."""
    if mesh.dim == 1:
        h = mesh.cell_measures
        el = (h[:, None, None] / 6.0) * np.array([[2.0, 1.0], [1.0, 2.0]])
    else:
        area = mesh.cell_measures
        base = (np.ones((3, 3)) + np.eye(3)) / 12.0
        el = area[:, None, None] * base
    return _scatter(mesh, el, symmetric=True)


def assemble_stiffness(mesh: Mesh) -> SparseOperator:
    """Stiffness matrix K_ij = int grad phi_i . grad phi_j dx."""
    md = mesh_data(mesh)
    el = np.einsum("c,cid,cjd->cij", mesh.cell_measures, md.grads, md.grads)
    return _scatter(mesh, el, symmetric=True)


def _values_at_quad(mesh, integrand):
    md = mesh_data(mesh)
    # FeField-like objects are evaluated through the P1 basis
    coeffs = getattr(integrand, "coeffs", None)
    if coeffs is not None:
        if integrand.mesh is not mesh:
            raise ValueError("field lives on a different mesh")
        return kernels.eval_p1(mesh.cells, md.basis, coeffs)
    pts = md.quad_points.reshape(-1, mesh.dim)
    vals = np.asarray(integrand(pts), dtype=np.float64)
    if vals.shape != (pts.shape[0], 3):
        raise ValueError("integrand must return an (n, 3) array")
    return np.ascontiguousarray(vals.reshape(mesh.n_cells, md.nq, 3))


def assemble_load(mesh: Mesh, integrand) -> np.ndarray:
    """Quadrature load vector b_i = int integrand . phi_i dx, shape (nv, 3).

    ``integrand`` is either a vectorised callable mapping (n, dim) points to
    (n, 3) values, or a field on the same mesh (then evaluated through its
    P1 basis).
    """
    md = mesh_data(mesh)
    vals = _values_at_quad(mesh, integrand)
    return kernels.load_vector(mesh.cells, md.basis, md.weights, vals,
                               mesh.n_vertices)


def assemble_weighted_cross(mesh: Mesh, w_at_quad) -> sparse.csr_matrix:
    """Matrix of the form <w x v, chi> acting on interleaved R^3 coefficients.

    ``w_at_quad`` has shape (nc, nq, 3).  The result is the (3nv, 3nv) sparse
    matrix A with A[(3i+a, 3j+c)] = int phi_i phi_j (w x)_{ac} dx, where
    (w x) is the cross-product matrix of w.
    """
    md = mesh_data(mesh)
    ints = kernels.pair_integrals(mesh.cells, md.basis, md.weights,
                                  np.ascontiguousarray(w_at_quad))
    return _expand_cross(mesh, md, ints)


def assemble_weighted_cross_convection(mesh: Mesh, w_at_quad, nu_dot_grad) \
        -> sparse.csr_matrix:
    """Matrix of <w x (nu . grad v), chi> on interleaved R^3 coefficients.

    ``nu_dot_grad`` has shape (nc, nq, nloc): the directional derivative of
    each local basis function.
    """
    md = mesh_data(mesh)
    ints = kernels.conv_pair_integrals(mesh.cells, md.basis, md.weights,
                                       np.ascontiguousarray(w_at_quad),
                                       np.ascontiguousarray(nu_dot_grad))
    return _expand_cross(mesh, md, ints)


def _expand_cross(mesh, md, ints):
    rows, cols, b, sign = md.cross_pattern()
    data = (ints[:, :, :, b] * sign).ravel()
    n = 3 * mesh.n_vertices
    return sparse.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()


def assemble_convection(mesh: Mesh, nu_dot_grad) -> SparseOperator:
    """Scalar convection matrix B_ij = int phi_i (nu . grad phi_j) dx."""
    md = mesh_data(mesh)
    el = np.einsum("cq,qi,cqj->cij", md.weights, md.basis, nu_dot_grad)
    return _scatter(mesh, el, symmetric=False)
