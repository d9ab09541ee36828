"""Parity between the numpy kernels and the compiled extension.

Every test compares both backends on the same random states; they are
skipped (not failed) when the extension was not built, since the package
contract is numpy-fallback-with-identical-semantics.
"""

import numpy as np
import pytest

from patchqnet import BACKEND, available_backends
from patchqnet import _kernels_py as kpy
from patchqnet import classifier as cl
from patchqnet import statevec as sv

BACKENDS = available_backends()

needs_ext = pytest.mark.skipif("cython" not in BACKENDS,
                               reason="compiled extension not built")


def random_states(rng, batch, n):
    psi = rng.normal(size=(batch, 2 ** n)) + 1j * rng.normal(size=(batch, 2 ** n))
    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    return np.ascontiguousarray(psi)


def test_python_backend_always_available():
    assert "python" in BACKENDS
    assert BACKENDS["python"] is kpy
    assert BACKEND in BACKENDS


@needs_ext
@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_single_qubit_kernel_parity(rng, n):
    kcy = BACKENDS["cython"]
    psi = random_states(rng, 4, n)
    m = (0.36 + 0.2j, -0.93j, -0.93j, 0.36 - 0.2j)
    for q in range(n):
        a, b = psi.copy(), psi.copy()
        kpy.apply_1q(a, q, *m)
        kcy.apply_1q(b, q, *m)
        np.testing.assert_allclose(a, b, atol=1e-15)
        # diagonal fast path
        a, b = psi.copy(), psi.copy()
        kpy.apply_1q(a, q, 1.0, 0.0, 0.0, -1j)
        kcy.apply_1q(b, q, 1.0, 0.0, 0.0, -1j)
        np.testing.assert_allclose(a, b, atol=1e-15)


@needs_ext
@pytest.mark.parametrize("n", [2, 3, 6])
def test_two_qubit_kernel_parity(rng, n):
    kcy = BACKENDS["cython"]
    psi = random_states(rng, 4, n)
    m = (0.8, 0.6j, 0.6j, 0.8)
    for q in range(n):
        for ctrl in range(n):
            if ctrl == q:
                continue
            for cval in (0, 1):
                a, b = psi.copy(), psi.copy()
                kpy.apply_1q_ctrl(a, q, ctrl, cval, *m)
                kcy.apply_1q_ctrl(b, q, ctrl, cval, *m)
                np.testing.assert_allclose(a, b, atol=1e-15)
            a, b = psi.copy(), psi.copy()
            kpy.apply_cnot(a, ctrl, q)
            kcy.apply_cnot(b, ctrl, q)
            np.testing.assert_array_equal(a, b)
            for tv in (0, 1):
                a, b = psi.copy(), psi.copy()
                kpy.project_ctrl(a, ctrl, tv)
                kcy.project_ctrl(b, ctrl, tv)
                np.testing.assert_array_equal(a, b)


@needs_ext
def test_toffoli_and_expectation_parity(rng):
    kcy = BACKENDS["cython"]
    psi = random_states(rng, 5, 6)
    for c1, c2, t in [(0, 1, 2), (5, 4, 3), (1, 5, 0), (2, 0, 4)]:
        a, b = psi.copy(), psi.copy()
        kpy.apply_toffoli(a, c1, c2, t)
        kcy.apply_toffoli(b, c1, c2, t)
        np.testing.assert_array_equal(a, b)
    for q in range(6):
        np.testing.assert_allclose(kpy.exp_z(psi.copy(), q),
                                   kcy.exp_z(psi.copy(), q), atol=1e-14)


@needs_ext
def test_full_adjoint_gradient_parity_across_backends(rng):
    circuit, params = cl.build_classifier_circuit()
    params.randomize(rng)
    raw = rng.random((6, 64))
    psi0, _ = sv.encode_rows(raw, n_qubits=circuit.n_qubits)
    results = {}
    for name, kernels in BACKENDS.items():
        results[name] = sv.adjoint_gradients(circuit, params, psi0,
                                             want_input_grad=True,
                                             kernels=kernels)
    e1, g1, a1 = results["python"]
    e2, g2, a2 = results["cython"]
    np.testing.assert_allclose(e1, e2, atol=1e-13)
    np.testing.assert_allclose(g1, g2, atol=1e-13)
    np.testing.assert_allclose(a1, a2, atol=1e-13)
