# cython: boundscheck=False, wraparound=False, cdivision=True
"""Cython implementations of the per-step assembly kernels.

Same contracts as ``_kernels_py``; plain typed loops over cells and
quadrature points.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

backend_name = "cython"


def eval_p1(cnp.int64_t[:, ::1] cells, cnp.float64_t[:, ::1] basis,
            cnp.float64_t[:, ::1] coeffs):
    cdef Py_ssize_t nc = cells.shape[0]
    cdef Py_ssize_t nl = cells.shape[1]
    cdef Py_ssize_t nq = basis.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] out = np.zeros((nc, nq, 3))
    cdef cnp.float64_t[:, :, ::1] o = out
    cdef Py_ssize_t c, q, l, k
    cdef cnp.int64_t node
    cdef double b
    for c in range(nc):
        for q in range(nq):
            for l in range(nl):
                node = cells[c, l]
                b = basis[q, l]
                for k in range(3):
                    o[c, q, k] += b * coeffs[node, k]
    return out


def load_vector(cnp.int64_t[:, ::1] cells, cnp.float64_t[:, ::1] basis,
                cnp.float64_t[:, ::1] weights, cnp.float64_t[:, :, ::1] values,
                Py_ssize_t n_vertices):
    cdef Py_ssize_t nc = cells.shape[0]
    cdef Py_ssize_t nl = cells.shape[1]
    cdef Py_ssize_t nq = basis.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n_vertices, 3))
    cdef cnp.float64_t[:, ::1] o = out
    cdef Py_ssize_t c, q, l, k
    cdef cnp.int64_t node
    cdef double wb
    for c in range(nc):
        for l in range(nl):
            node = cells[c, l]
            for q in range(nq):
                wb = weights[c, q] * basis[q, l]
                for k in range(3):
                    o[node, k] += wb * values[c, q, k]
    return out


def pair_integrals(cnp.int64_t[:, ::1] cells, cnp.float64_t[:, ::1] basis,
                   cnp.float64_t[:, ::1] weights,
                   cnp.float64_t[:, :, ::1] values):
    cdef Py_ssize_t nc = cells.shape[0]
    cdef Py_ssize_t nl = cells.shape[1]
    cdef Py_ssize_t nq = basis.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=4] out = np.zeros((nc, nl, nl, 3))
    cdef cnp.float64_t[:, :, :, ::1] o = out
    cdef Py_ssize_t c, q, i, j, k
    cdef double w, wi, wij
    for c in range(nc):
        for q in range(nq):
            w = weights[c, q]
            for i in range(nl):
                wi = w * basis[q, i]
                for j in range(nl):
                    wij = wi * basis[q, j]
                    for k in range(3):
                        o[c, i, j, k] += wij * values[c, q, k]
    return out


def conv_pair_integrals(cnp.int64_t[:, ::1] cells, cnp.float64_t[:, ::1] basis,
                        cnp.float64_t[:, ::1] weights,
                        cnp.float64_t[:, :, ::1] values,
                        cnp.float64_t[:, :, ::1] nu_dot_grad):
    cdef Py_ssize_t nc = cells.shape[0]
    cdef Py_ssize_t nl = cells.shape[1]
    cdef Py_ssize_t nq = basis.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=4] out = np.zeros((nc, nl, nl, 3))
    cdef cnp.float64_t[:, :, :, ::1] o = out
    cdef Py_ssize_t c, q, i, j, k
    cdef double w, wi, wij
    for c in range(nc):
        for q in range(nq):
            w = weights[c, q]
            for i in range(nl):
                wi = w * basis[q, i]
                for j in range(nl):
                    wij = wi * nu_dot_grad[c, q, j]
                    for k in range(3):
                        o[c, i, j, k] += wij * values[c, q, k]
    return out
