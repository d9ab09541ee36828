"""Patch pipeline: extraction, mask, reducer circuits, fused features."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from patchqnet import reducer as rd
from patchqnet import statevec as sv
from patchqnet.ansatz import ParameterSet, SharingPolicy
from patchqnet.errors import ConfigurationError, ContractError

MASK_UNIFORM = 2.0 / 17.0       # 16 v / (v * 136)
MASK_SINGLE = 1.0 / 136.0       # one nonzero pixel


def random_image(rng, side=32):
    return rng.random((side, side))


# --- patches -------------------------------------------------------------

def test_extract_patches_layout():
    img = np.arange(1024, dtype=float).reshape(32, 32)
    grid = rd.extract_patches(img, 4)
    assert grid.patches.shape == (8, 8, 16)
    np.testing.assert_array_equal(
        grid.patches[0, 0], img[0:4, 0:4].ravel())
    np.testing.assert_array_equal(
        grid.patches[2, 5], img[8:12, 20:24].ravel())
    np.testing.assert_array_equal(rd.reassemble(grid), img)


def test_extract_patches_validation():
    with pytest.raises(ConfigurationError):
        rd.extract_patches(np.zeros((32, 16)), 4)
    with pytest.raises(ConfigurationError):
        rd.extract_patches(np.zeros((30, 30)), 4)
    with pytest.raises(ConfigurationError):
        rd.extract_patches(np.zeros((36, 36)), 6)  # 36 not a power of two


# --- attention mask -------------------------------------------------------

def test_attention_mask_frozen_values():
    assert rd.attention_mask(np.full(16, 0.37)) == pytest.approx(MASK_UNIFORM, abs=1e-15)
    one = np.zeros(16)
    one[5] = 1.0
    assert rd.attention_mask(one) == pytest.approx(MASK_SINGLE, abs=1e-15)
    assert rd.attention_mask(np.zeros(16)) == 0.0


def test_attention_mask_rejects_negative():
    bad = np.zeros(16)
    bad[3] = -0.1
    with pytest.raises(ContractError):
        rd.attention_mask(bad)
    with pytest.raises(ContractError):
        rd.attention_mask_rows(bad[None])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=16, max_size=16), st.floats(0.01, 100))
def test_attention_mask_bounds_and_scale_invariance(vals, scale):
    patch = np.array(vals)
    y = rd.attention_mask(patch)
    if patch.max() == 0:
        assert y == 0.0
    else:
        assert MASK_SINGLE - 1e-12 <= y <= MASK_UNIFORM + 1e-12
    assert rd.attention_mask(scale * patch) == pytest.approx(y, abs=1e-12)


def test_attention_mask_rows_matches_scalar(rng):
    rows = rng.random((40, 16))
    rows[7] = 0.0
    got = rd.attention_mask_rows(rows)
    want = np.array([rd.attention_mask(r) for r in rows])
    np.testing.assert_allclose(got, want, atol=1e-15)


# --- circuits --------------------------------------------------------------

def test_reducer_circuit_structure():
    circ, params = rd.build_reducer_circuit(4)
    assert circ.n_qubits == 4
    assert circ.kept_qubits == (0,)
    assert params.total_trainable() == 8
    assert params.group_names() == ["conv1", "pool1", "conv2", "pool2"]
    # conv(4) 4 ansatzes, pool 4->2, conv(2) 1 ansatz, pool 2->1
    assert len(circ.gates) == 4 * 5 + 2 * 3 + 1 * 5 + 1 * 3
    dropped = {q for _, q in circ.discards}
    assert dropped == {1, 2, 3}


def test_reducer_circuit_r2():
    circ, params = rd.build_reducer_circuit(2)
    assert circ.n_qubits == 2
    assert params.total_trainable() == 4
    assert len(circ.gates) == 5 + 3


def test_naive_pool_reducer_structure():
    circ, params = rd.build_naive_pool_reducer(4)
    assert circ.n_qubits == 4
    assert circ.kept_qubits == (0,)
    assert params.total_trainable() == 4
    assert params.group_names() == ["pool1", "pool2"]
    assert all(g.kind in ("crz", "x", "crx_anti") for g in circ.gates)


def test_reducer_rejects_bad_patch_side():
    with pytest.raises(ConfigurationError):
        rd.build_reducer_circuit(3)


@pytest.mark.parametrize("builder", [rd.build_reducer_circuit, rd.build_naive_pool_reducer])
def test_reducer_circuits_match_dense_oracle(builder, rng):
    circ, params = builder(4)
    for _ in range(25):
        params.randomize(rng)
        psi0 = oracles.random_state(rng, 4)
        got = sv.apply_circuit(sv.QuantumState(4, psi0), circ, params).amplitudes
        want = oracles.run_circuit(circ, params, psi0)
        np.testing.assert_allclose(got, want, atol=1e-10)
        assert abs(np.linalg.norm(got) - 1) < 1e-10


# --- fused features ---------------------------------------------------------

def test_reduce_image_shape_and_fusion(rng):
    circ, params = rd.build_reducer_circuit(4)
    params.randomize(rng)
    img = random_image(rng)
    feats = rd.reduce_image(img, circ, params)
    assert feats.gamma.shape == (8, 8)
    np.testing.assert_allclose(feats.gamma, feats.quantum_part * feats.mask_part,
                               atol=1e-15)
    assert np.all(np.abs(feats.quantum_part) <= 1 + 1e-12)


def test_reduce_image_matches_per_patch_oracle(rng):
    circ, params = rd.build_reducer_circuit(4)
    params.randomize(rng)
    img = random_image(rng)
    feats = rd.reduce_image(img, circ, params)
    grid = rd.extract_patches(img, 4)
    for p in range(8):
        for q in range(8):
            patch = grid.patches[p, q]
            psi0 = oracles.amplitude_encode_ref(patch)
            z = oracles.circuit_expectations(circ, params, psi0)[0]
            y = rd.attention_mask(patch)
            assert feats.quantum_part[p, q] == pytest.approx(z, abs=1e-10)
            assert feats.mask_part[p, q] == pytest.approx(y, abs=1e-12)
            assert feats.gamma[p, q] == pytest.approx(z * y, abs=1e-10)


def test_reduce_zero_image_gives_zero_gamma():
    circ, params = rd.build_reducer_circuit(4)
    params.randomize(np.random.default_rng(0))
    feats = rd.reduce_image(np.zeros((32, 32)), circ, params)
    np.testing.assert_array_equal(feats.gamma, np.zeros((8, 8)))
    np.testing.assert_array_equal(feats.mask_part, np.zeros((8, 8)))


def test_patch_locality(rng):
    circ, params = rd.build_reducer_circuit(4)
    params.randomize(rng)
    img = random_image(rng)
    bumped = img.copy()
    bumped[12:16, 24:28] = rng.random((4, 4))  # patch (3, 6) only
    a = rd.reduce_image(img, circ, params).gamma
    b = rd.reduce_image(bumped, circ, params).gamma
    diff = np.abs(a - b) > 1e-14
    assert diff[3, 6]
    diff[3, 6] = False
    assert not diff.any()


def test_reduce_images_batch_matches_single(rng):
    circ, params = rd.build_reducer_circuit(4)
    params.randomize(rng)
    imgs = rng.random((3, 32, 32))
    batch = rd.reduce_images(imgs, circ, params)
    for i in range(3):
        single = rd.reduce_image(imgs[i], circ, params)
        np.testing.assert_allclose(batch[i].gamma, single.gamma, atol=1e-14)


def test_reduce_grads_match_finite_differences(rng):
    circ, params = rd.build_reducer_circuit(4)
    params.randomize(rng)
    img = random_image(rng)
    feats, dq = rd.reduce_image_with_grads(img, circ, params)
    assert dq.shape == (8, 8, 8)
    np.testing.assert_allclose(
        feats.gamma, rd.reduce_image(img, circ, params).gamma, atol=1e-14)

    def gamma_entries(theta):
        trial = params.copy()
        trial.set_vector(theta)
        return rd.reduce_image(img, circ, trial).gamma.ravel()

    fd = oracles.central_difference_multi(gamma_entries, params.vector(), 1e-5)
    dgamma = (feats.mask_part[:, :, None] * dq).reshape(64, 8)
    assert oracles.relative_error(dgamma, fd, floor=1e-6) < 1e-4


def test_zero_mask_patch_contributes_zero_gradient(rng):
    circ, params = rd.build_reducer_circuit(4)
    params.randomize(rng)
    img = np.zeros((32, 32))
    img[4:8, 4:8] = rng.random((4, 4))  # only patch (1, 1) is populated
    feats, dq = rd.reduce_image_with_grads(img, circ, params)
    dgamma = feats.mask_part[:, :, None] * dq
    assert np.any(np.abs(dgamma[1, 1]) > 1e-6)
    dgamma[1, 1] = 0.0
    np.testing.assert_array_equal(dgamma, np.zeros_like(dgamma))


def test_shared_gradient_equals_sum_of_unshared_occurrences(rng):
    shared_c, shared_p = rd.build_reducer_circuit(4, SharingPolicy())
    unshared_pol = SharingPolicy(conv_shared=False, pool_shared=False)
    unshared_c, unshared_p = rd.build_reducer_circuit(4, unshared_pol)
    shared_p.randomize(rng)
    # tie every unshared occurrence to the shared value of its layer slot
    for name in unshared_p.group_names():
        vals = unshared_p.group_values(name)
        svals = shared_p.group_values(name)
        for i in range(len(vals)):
            unshared_p.set_value((name, i), svals[i % 2])
    img = random_image(rng)
    feats_s, dq_s = rd.reduce_image_with_grads(img, shared_c, shared_p)
    feats_u, dq_u = rd.reduce_image_with_grads(img, unshared_c, unshared_p)
    np.testing.assert_allclose(feats_s.gamma, feats_u.gamma, atol=1e-12)
    slots_s = sv.circuit_trainable_slots(shared_c, shared_p)
    slots_u = sv.circuit_trainable_slots(unshared_c, unshared_p)
    for j, (name, i) in enumerate(slots_s):
        cols = [k for k, (un, ui) in enumerate(slots_u)
                if un == name and ui % 2 == i]
        np.testing.assert_allclose(dq_s[:, :, j], dq_u[:, :, cols].sum(axis=2),
                                   atol=1e-10)
