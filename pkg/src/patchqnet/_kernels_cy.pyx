# cython: boundscheck=False, wraparound=False, cdivision=True
"""Batched gate kernels, compiled twin of `_kernels_py`.

Same contracts: every kernel mutates a C-contiguous (batch, 2**n)
complex128 array in place, qubit q addresses bit q of the column index.
"""

import numpy as np

cimport numpy as cnp

NAME = "cython"

ctypedef double complex cplx


def apply_1q(cplx[:, ::1] psi, int q, cplx m00, cplx m01, cplx m10, cplx m11):
    cdef Py_ssize_t b = psi.shape[0], dim = psi.shape[1]
    cdef Py_ssize_t low = 1 << q, step = low << 1
    cdef Py_ssize_t r, base, off, i0, i1
    cdef cplx a, c
    cdef bint diagonal = (m01 == 0 and m10 == 0)
    with nogil:
        for r in range(b):
            base = 0
            while base < dim:
                for off in range(low):
                    i0 = base + off
                    i1 = i0 + low
                    if diagonal:
                        psi[r, i0] = m00 * psi[r, i0]
                        psi[r, i1] = m11 * psi[r, i1]
                    else:
                        a = psi[r, i0]
                        c = psi[r, i1]
                        psi[r, i0] = m00 * a + m01 * c
                        psi[r, i1] = m10 * a + m11 * c
                base += step


def apply_1q_ctrl(cplx[:, ::1] psi, int q, int ctrl, int cval,
                  cplx m00, cplx m01, cplx m10, cplx m11):
    cdef Py_ssize_t b = psi.shape[0], dim = psi.shape[1]
    cdef Py_ssize_t low = 1 << q, step = low << 1
    cdef Py_ssize_t r, base, off, i0, i1
    cdef cplx a, c
    with nogil:
        for r in range(b):
            base = 0
            while base < dim:
                for off in range(low):
                    i0 = base + off
                    # ctrl != q, so both pair members share the control bit
                    if ((i0 >> ctrl) & 1) == cval:
                        i1 = i0 + low
                        a = psi[r, i0]
                        c = psi[r, i1]
                        psi[r, i0] = m00 * a + m01 * c
                        psi[r, i1] = m10 * a + m11 * c
                base += step


def apply_cnot(cplx[:, ::1] psi, int ctrl, int q):
    cdef Py_ssize_t b = psi.shape[0], dim = psi.shape[1]
    cdef Py_ssize_t low = 1 << q, step = low << 1
    cdef Py_ssize_t r, base, off, i0, i1
    cdef cplx a
    with nogil:
        for r in range(b):
            base = 0
            while base < dim:
                for off in range(low):
                    i0 = base + off
                    if (i0 >> ctrl) & 1:
                        i1 = i0 + low
                        a = psi[r, i0]
                        psi[r, i0] = psi[r, i1]
                        psi[r, i1] = a
                base += step


def apply_toffoli(cplx[:, ::1] psi, int c1, int c2, int q):
    cdef Py_ssize_t b = psi.shape[0], dim = psi.shape[1]
    cdef Py_ssize_t low = 1 << q, step = low << 1
    cdef Py_ssize_t r, base, off, i0, i1
    cdef cplx a
    with nogil:
        for r in range(b):
            base = 0
            while base < dim:
                for off in range(low):
                    i0 = base + off
                    if ((i0 >> c1) & 1) and ((i0 >> c2) & 1):
                        i1 = i0 + low
                        a = psi[r, i0]
                        psi[r, i0] = psi[r, i1]
                        psi[r, i1] = a
                base += step


def project_ctrl(cplx[:, ::1] psi, int ctrl, int cval):
    """Zero every amplitude whose control bit differs from cval."""
    cdef Py_ssize_t b = psi.shape[0], dim = psi.shape[1]
    cdef Py_ssize_t r, i
    cdef int drop = 1 - cval
    with nogil:
        for r in range(b):
            for i in range(dim):
                if ((i >> ctrl) & 1) == drop:
                    psi[r, i] = 0.0


def exp_z(cplx[:, ::1] psi, int q):
    """Per-row Pauli-Z expectation of qubit q, shape (batch,)."""
    cdef Py_ssize_t b = psi.shape[0], dim = psi.shape[1]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(b, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t r, i
    cdef double acc, p
    cdef cplx a
    with nogil:
        for r in range(b):
            acc = 0.0
            for i in range(dim):
                a = psi[r, i]
                p = a.real * a.real + a.imag * a.imag
                if (i >> q) & 1:
                    acc -= p
                else:
                    acc += p
            ov[r] = acc
    return out
