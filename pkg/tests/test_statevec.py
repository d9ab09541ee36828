"""Simulator core vs the dense-matrix and finite-difference oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from patchqnet import statevec as sv
from patchqnet.ansatz import ParameterSet
from patchqnet.errors import (
    ConfigurationError,
    ContractError,
    DegenerateInputError,
    InvalidInputError,
)

ALL_KINDS = sorted(sv.GATE_ARITY)


def make_gate(rng, kind, n):
    qs = tuple(rng.choice(n, size=sv.GATE_ARITY[kind], replace=False))
    slot = ("g", 0) if kind in sv.PARAM_KINDS else None
    return sv.GateOp(kind, qs, slot)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_single_gate_matches_dense_matrix(kind, rng):
    n = 3
    for _ in range(25):
        gate = make_gate(rng, kind, n)
        angle = rng.uniform(0, 2 * np.pi)
        psi0 = oracles.random_state(rng, n)
        got = (
            sv.apply_gate(sv.QuantumState(n, psi0), gate,
                          angle if kind in sv.PARAM_KINDS else None)
            .amplitudes
        )
        want = oracles.gate_unitary(gate, angle, n) @ psi0
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_apply_circuit_matches_matrix_chain(rng):
    for _ in range(20):
        n = int(rng.integers(2, 5))
        params = ParameterSet()
        params.add_group("g", 6, values=rng.uniform(0, 2 * np.pi, 6))
        gates = []
        for _ in range(12):
            kind = ALL_KINDS[rng.integers(len(ALL_KINDS))]
            if sv.GATE_ARITY[kind] > n:
                continue
            g = make_gate(rng, kind, n)
            if g.param_slot is not None:
                g = sv.GateOp(g.kind, g.qubits, ("g", int(rng.integers(6))))
            gates.append(g)
        circ = sv.CircuitSpec(n, gates, kept_qubits=tuple(range(n)))
        psi0 = oracles.random_state(rng, n)
        got = sv.apply_circuit(sv.QuantumState(n, psi0), circ, params).amplitudes
        want = oracles.run_circuit(circ, params, psi0)
        np.testing.assert_allclose(got, want, atol=1e-12)
        for q in range(n):
            np.testing.assert_allclose(
                sv.expectation_z(sv.QuantumState(n, got), q),
                oracles.z_expectation(want, q, n),
                atol=1e-12,
            )


def test_identity_rotation_is_noop(rng):
    psi0 = oracles.random_state(rng, 2)
    out = sv.apply_gate(sv.QuantumState(2, psi0), sv.GateOp("rx", (0,), ("g", 0)), 0.0)
    np.testing.assert_allclose(out.amplitudes, psi0, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(0, 2 * np.pi))
def test_gates_preserve_norm(seed, angle):
    rng = np.random.default_rng(seed)
    n = 3
    psi = oracles.random_state(rng, n)
    for kind in ALL_KINDS:
        gate = make_gate(rng, kind, n)
        st_out = sv.apply_gate(
            sv.QuantumState(n, psi), gate, angle if kind in sv.PARAM_KINDS else None
        )
        assert abs(st_out.norm() - 1.0) < 1e-10


# --- amplitude encoding ------------------------------------------------

def test_amplitude_encode_normalizes(rng):
    v = rng.random(16)
    state = sv.amplitude_encode(v)
    assert state.n_qubits == 4
    np.testing.assert_allclose(state.amplitudes, oracles.amplitude_encode_ref(v), atol=1e-15)
    assert abs(state.norm() - 1.0) < 1e-12


def test_amplitude_encode_zero_vector_convention():
    state = sv.amplitude_encode(np.zeros(16))
    want = np.zeros(16)
    want[0] = 1.0
    np.testing.assert_array_equal(state.amplitudes, want)


def test_amplitude_encode_rejects_bad_lengths():
    with pytest.raises(InvalidInputError):
        sv.amplitude_encode(np.ones(6))
    with pytest.raises(InvalidInputError):
        sv.amplitude_encode(np.ones(16), n_qubits=5)
    with pytest.raises(InvalidInputError):
        sv.amplitude_encode(np.array([1.0, np.nan]))


def test_encode_rows_embeds_into_larger_register(rng):
    v = rng.random((5, 64))
    v[2] = 0.0
    psi, norms = sv.encode_rows(v, n_qubits=8)
    assert psi.shape == (5, 256)
    np.testing.assert_allclose(np.linalg.norm(psi, axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(norms, np.linalg.norm(v, axis=1))
    np.testing.assert_allclose(psi[0, :64], oracles.amplitude_encode_ref(v[0]), atol=1e-15)
    assert np.all(psi[:, 64:] == 0)
    assert psi[2, 0] == 1.0 and np.all(psi[2, 1:] == 0)


# --- structure validation ----------------------------------------------

def test_gateop_validation():
    with pytest.raises(ContractError):
        sv.GateOp("h", (0, 1))
    with pytest.raises(ContractError):
        sv.GateOp("cnot", (1, 1))
    with pytest.raises(ContractError):
        sv.GateOp("rx", (0,))  # missing slot
    with pytest.raises(ContractError):
        sv.GateOp("h", (0,), ("g", 0))  # slot on fixed gate
    with pytest.raises(ContractError):
        sv.GateOp("warp", (0,))


def test_circuit_validation():
    g = [sv.GateOp("h", (0,))]
    with pytest.raises(ContractError):
        sv.CircuitSpec(1, g, kept_qubits=())
    with pytest.raises(ContractError):
        sv.CircuitSpec(1, g, kept_qubits=(1,))
    with pytest.raises(ContractError):
        sv.CircuitSpec(1, [sv.GateOp("h", (3,))], kept_qubits=(0,))
    # a discarded qubit must not be acted on afterwards
    gates = [sv.GateOp("h", (0,)), sv.GateOp("h", (1,))]
    with pytest.raises(ContractError):
        sv.CircuitSpec(2, gates, kept_qubits=(0,), discards=((0, 1),))


def test_unresolvable_slot_is_config_error(rng):
    circ = sv.CircuitSpec(1, [sv.GateOp("rx", (0,), ("nope", 0))], kept_qubits=(0,))
    params = ParameterSet()
    params.add_group("g", 1)
    with pytest.raises(ConfigurationError):
        sv.apply_circuit(sv.zero_state(1), circ, params)


# --- gradients ----------------------------------------------------------

def random_mixed_circuit(rng, n, n_slots):
    """A circuit exercising every parameterized kind plus fixed gates."""
    params = ParameterSet()
    params.add_group("g", n_slots, values=rng.uniform(0, 2 * np.pi, n_slots))
    gates = []
    for _ in range(14):
        kind = ALL_KINDS[rng.integers(len(ALL_KINDS))]
        if sv.GATE_ARITY[kind] > n:
            continue
        qs = tuple(rng.choice(n, size=sv.GATE_ARITY[kind], replace=False))
        slot = ("g", int(rng.integers(n_slots))) if kind in sv.PARAM_KINDS else None
        gates.append(sv.GateOp(kind, qs, slot))
    if not any(g.param_slot is not None for g in gates):
        gates.append(sv.GateOp("rx", (0,), ("g", 0)))
    kept = tuple(rng.choice(n, size=min(2, n), replace=False))
    return sv.CircuitSpec(n, gates, kept_qubits=kept), params


def test_param_gradients_match_finite_differences(rng):
    for _ in range(20):
        n = int(rng.integers(2, 5))
        circ, params = random_mixed_circuit(rng, n, 5)
        psi0 = np.abs(oracles.random_state(rng, n))
        psi0 /= np.linalg.norm(psi0)
        state = sv.QuantumState(n, psi0.astype(complex))
        grads = sv.grad_expectation_params(circ, params, state)

        def expectations(theta):
            trial = params.copy()
            trial.set_vector(theta)
            return oracles.circuit_expectations(circ, trial, psi0)

        fd = oracles.central_difference_multi(expectations, params.vector(), 1e-5)
        slots = sv.circuit_trainable_slots(circ, params)
        all_slots = params.trainable_slots()
        for slot, got in grads.items():
            want = fd[:, all_slots.index(slot)]
            assert oracles.relative_error(got, want, floor=1e-6) < 1e-4
        assert set(grads) == set(slots)


def test_shared_slot_gradient_sums_occurrences():
    # Rx(t) twice sharing one slot acts like Rx(2t): d<Z>/dt = -2 sin(2t)
    params = ParameterSet()
    params.add_group("g", 1, values=[0.7])
    gates = [sv.GateOp("rx", (0,), ("g", 0)), sv.GateOp("rx", (0,), ("g", 0))]
    circ = sv.CircuitSpec(1, gates, kept_qubits=(0,))
    grads = sv.grad_expectation_params(circ, params, sv.zero_state(1))
    np.testing.assert_allclose(grads[("g", 0)], [-2 * np.sin(1.4)], atol=1e-12)


def test_batched_adjoint_matches_per_sample(rng):
    circ, params = random_mixed_circuit(rng, 3, 4)
    psi0 = np.stack([oracles.random_state(rng, 3) for _ in range(6)])
    expect, grads, _ = sv.adjoint_gradients(circ, params, psi0)
    for b in range(6):
        want_e = oracles.circuit_expectations(circ, params, psi0[b])
        np.testing.assert_allclose(expect[b], want_e, atol=1e-10)
        single_e, single_g, _ = sv.adjoint_gradients(circ, params, psi0[b:b + 1])
        np.testing.assert_allclose(grads[b], single_g[0], atol=1e-12)


def test_input_gradients_match_finite_differences(rng):
    for _ in range(20):
        n = int(rng.integers(2, 4))
        circ, params = random_mixed_circuit(rng, n, 4)
        raw = rng.random(1 << n) + 0.1

        jac = sv.grad_expectation_inputs(circ, params, raw)

        def expectations(v):
            psi0 = oracles.amplitude_encode_ref(v)
            return oracles.circuit_expectations(circ, params, psi0)

        fd = oracles.central_difference_multi(expectations, raw, 1e-5)
        assert oracles.relative_error(jac, fd, floor=1e-6) < 1e-4
        # normalization scale invariance: J @ x == 0
        np.testing.assert_allclose(jac @ raw, 0.0, atol=1e-8)


def test_input_gradient_rejects_zero_vector(rng):
    circ, params = random_mixed_circuit(rng, 2, 2)
    with pytest.raises(DegenerateInputError):
        sv.grad_expectation_inputs(circ, params, np.zeros(4))


def test_run_batch_preserves_norm_and_matches_oracle(rng):
    circ, params = random_mixed_circuit(rng, 4, 6)
    psi0 = np.stack([oracles.random_state(rng, 4) for _ in range(5)])
    out = sv.run_batch(circ, params, psi0)
    np.testing.assert_allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-10)
    u = oracles.circuit_unitary(circ, params)
    np.testing.assert_allclose(out, psi0 @ u.T, atol=1e-10)
