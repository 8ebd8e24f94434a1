"""Pure-numpy implementations of the per-step assembly kernels.

These four routines are the hot spots of the time-stepping loop: evaluating
nodal fields at quadrature points, accumulating quadrature load vectors, and
computing the cell-pair integrals behind the state-dependent cross-product
matrices.  A compiled Cython twin lives in ``_kernels_cy``; either backend
can be selected through :mod:`sllbfem.kernels`.
"""

import numpy as np

backend_name = "numpy"


def eval_p1(cells, basis, coeffs):
    """Values of a P1 field at the quadrature points of every cell.

    cells: (nc, nl) int64, basis: (nq, nl), coeffs: (nv, 3).
    Returns (nc, nq, 3).
    """
    return np.einsum("ql,clk->cqk", basis, coeffs[cells], optimize=True)


def load_vector(cells, basis, weights, values, n_vertices):
    """Accumulate b[i, :] = sum_cells sum_q w_cq phi_i(q) values_cq.

    weights: (nc, nq) physical quadrature weights, values: (nc, nq, 3).
    Returns (n_vertices, 3).
    """
    contrib = np.einsum("cq,ql,cqk->clk", weights, basis, values, optimize=True)
    out = np.zeros((n_vertices, 3))
    np.add.at(out, cells, contrib)
    return out


def pair_integrals(cells, basis, weights, values):
    """Per-cell integrals I[c,i,j,:] = int phi_i phi_j values dx.

    Returns (nc, nl, nl, 3); the ingredients of the mass-like matrix with a
    vector-valued weight field.
    """
    return np.einsum("cq,qi,qj,cqb->cijb", weights, basis, basis, values,
                     optimize=True)


def conv_pair_integrals(cells, basis, weights, values, nu_dot_grad):
    """Per-cell integrals I[c,i,j,:] = int phi_i (nu . grad phi_j) values dx.

    nu_dot_grad: (nc, nq, nl) directional derivative of each local basis
    function at each quadrature point.  Returns (nc, nl, nl, 3).
    """
    return np.einsum("cq,qi,cqj,cqb->cijb", weights, basis, nu_dot_grad,
                     values, optimize=True)
