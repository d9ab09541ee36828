"""Batched gate kernels, pure-numpy reference implementation.

Every kernel mutates a C-contiguous complex128 array of shape
(batch, 2**n) holding one state vector per row.  Qubit q addresses bit q
of the column index (qubit 0 = least significant bit).  The compiled
twin `_kernels_cy` implements the same signatures; `backend` selects one
of the two at import time.
"""

import numpy as np

NAME = "python"


def _tensor_view(psi):
    b, dim = psi.shape
    n = dim.bit_length() - 1
    return psi.reshape((b,) + (2,) * n), n


def _axis(n, q):
    # batch axis first, then qubit n-1 down to qubit 0 (row-major index order)
    return 1 + (n - 1 - q)


def apply_1q(psi, q, m00, m01, m10, m11):
    b, dim = psi.shape
    low = 1 << q
    v = psi.reshape(b, dim >> (q + 1), 2, low)
    if m01 == 0 and m10 == 0:
        v[:, :, 0, :] *= m00
        v[:, :, 1, :] *= m11
        return
    a = v[:, :, 0, :].copy()
    c = v[:, :, 1, :]
    v[:, :, 0, :] = m00 * a + m01 * c
    v[:, :, 1, :] = m10 * a + m11 * c


def apply_1q_ctrl(psi, q, ctrl, cval, m00, m01, m10, m11):
    v, n = _tensor_view(psi)
    ax_q, ax_c = _axis(n, q), _axis(n, ctrl)
    i0 = [slice(None)] * (n + 1)
    i0[ax_c] = cval
    i1 = list(i0)
    i0[ax_q], i1[ax_q] = 0, 1
    i0, i1 = tuple(i0), tuple(i1)
    a = v[i0].copy()
    c = v[i1]
    v[i0] = m00 * a + m01 * c
    v[i1] = m10 * a + m11 * c


def apply_cnot(psi, ctrl, q):
    v, n = _tensor_view(psi)
    ax_q, ax_c = _axis(n, q), _axis(n, ctrl)
    i0 = [slice(None)] * (n + 1)
    i0[ax_c] = 1
    i1 = list(i0)
    i0[ax_q], i1[ax_q] = 0, 1
    i0, i1 = tuple(i0), tuple(i1)
    a = v[i0].copy()
    v[i0] = v[i1]
    v[i1] = a


def apply_toffoli(psi, c1, c2, q):
    v, n = _tensor_view(psi)
    i0 = [slice(None)] * (n + 1)
    i0[_axis(n, c1)] = 1
    i0[_axis(n, c2)] = 1
    i1 = list(i0)
    i0[_axis(n, q)], i1[_axis(n, q)] = 0, 1
    i0, i1 = tuple(i0), tuple(i1)
    a = v[i0].copy()
    v[i0] = v[i1]
    v[i1] = a


def project_ctrl(psi, ctrl, cval):
    """Zero every amplitude whose control bit differs from cval."""
    v, n = _tensor_view(psi)
    idx = [slice(None)] * (n + 1)
    idx[_axis(n, ctrl)] = 1 - cval
    v[tuple(idx)] = 0.0


def exp_z(psi, q):
    """Per-row Pauli-Z expectation of qubit q, shape (batch,)."""
    b, dim = psi.shape
    low = 1 << q
    p = (psi.real ** 2 + psi.imag ** 2).reshape(b, dim >> (q + 1), 2, low)
    return p[:, :, 0, :].sum(axis=(1, 2)) - p[:, :, 1, :].sum(axis=(1, 2))
