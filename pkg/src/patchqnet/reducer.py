"""Patch extraction, the attention mask, and the patch-reduction circuits.

A 32x32 image splits into an 8x8 grid of 4x4 patches (row-major, stride
= patch side, no overlap).  Each patch contributes one fused feature:
the trained circuit's kept-qubit <Z> times a parameter-free classical
mask Y = sum(X) / (max(X) * T), T = 1 + 2 + ... + r^2.  Every patch is
reduced with the same circuit parameters, so patch evaluations batch
into a single simulator call.
"""

from dataclasses import dataclass

import numpy as np

from . import statevec as sv
from .ansatz import ParameterSet, SharingPolicy, build_conv_layer, build_pool_layer
from .errors import ConfigurationError, ContractError

PATCH_SIDE = 4
IMAGE_SIDE = 32


@dataclass(frozen=True)
class PatchGrid:
    """(G, G, r*r) flattened patches of an N x N image, G = N // r."""

    patches: np.ndarray
    image_side: int
    patch_side: int


@dataclass(frozen=True)
class ReducedFeatureMatrix:
    """Fused per-patch features: gamma = quantum_part * mask_part."""

    gamma: np.ndarray
    quantum_part: np.ndarray
    mask_part: np.ndarray


def extract_patches(image, r=PATCH_SIDE):
    """Split an N x N image into (N/r)^2 row-major flattened patches."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ConfigurationError(f"expected a square image, got {img.shape}")
    n = img.shape[0]
    if r < 1 or n % r:
        raise ConfigurationError(f"patch side {r} does not divide image side {n}")
    if (r * r) & (r * r - 1):
        raise ConfigurationError(f"patch size {r}x{r} is not a power of two")
    g = n // r
    patches = img.reshape(g, r, g, r).transpose(0, 2, 1, 3).reshape(g, g, r * r)
    return PatchGrid(patches, n, r)


def reassemble(grid):
    """Inverse of extract_patches."""
    g = grid.patches.shape[0]
    r = grid.patch_side
    return grid.patches.reshape(g, g, r, r).transpose(0, 2, 1, 3).reshape(g * r, g * r)


def _flat_patches(images, r):
    """(B, N, N) images -> (B, G*G, r*r) row-major patch rows."""
    b, n, _ = images.shape
    g = n // r
    return (images.reshape(b, g, r, g, r)
            .transpose(0, 1, 3, 2, 4)
            .reshape(b, g * g, r * r))


def attention_mask(patch):
    """Y = sum(X) / (max(X) * T) with T = 1 + ... + r^2; 0 for a zero patch."""
    x = np.asarray(patch, dtype=np.float64)
    if np.any(x < 0):
        raise ContractError("attention mask expects nonnegative pixels")
    top = float(x.max(initial=0.0))
    if top == 0.0:
        return 0.0
    t = x.size * (x.size + 1) // 2
    return float(x.sum() / (top * t))


def attention_mask_rows(patches):
    """Vectorized mask over (..., r*r) patch rows."""
    x = np.asarray(patches, dtype=np.float64)
    if np.any(x < 0):
        raise ContractError("attention mask expects nonnegative pixels")
    p = x.shape[-1]
    t = p * (p + 1) // 2
    top = x.max(axis=-1)
    out = np.zeros(x.shape[:-1])
    nz = top > 0
    out[nz] = x.sum(axis=-1)[nz] / (top[nz] * t)
    return out


def build_reducer_circuit(r=PATCH_SIDE, policy=None, params=None):
    """Alternating conv/pool circuit folding r*r amplitudes to one qubit.

    Returns (CircuitSpec, ParameterSet); layer groups are named conv1,
    pool1, conv2, ... in application order.
    """
    return _build_reducer(r, policy, params, with_conv=True)


def build_naive_pool_reducer(r=PATCH_SIDE, policy=None, params=None):
    """Pooling-only variant (no convolutional layers)."""
    return _build_reducer(r, policy, params, with_conv=False)


def _build_reducer(r, policy, params, with_conv):
    if (r * r) & (r * r - 1) or r < 2:
        raise ConfigurationError(f"patch size {r}x{r} is not a power of two")
    policy = policy or SharingPolicy()
    params = params if params is not None else ParameterSet()
    m = (r * r).bit_length() - 1
    active = list(range(m))
    gates = []
    discards = []
    layer = 0
    while len(active) > 1:
        layer += 1
        if with_conv:
            gates += build_conv_layer(active, policy, f"conv{layer}", params)
        pool, kept = build_pool_layer(active, policy, f"pool{layer}", params)
        gates += pool
        discards += [(len(gates) - 1, q) for q in active if q not in kept]
        active = kept
    if active != [0]:
        raise ContractError(f"reduction ended on qubit {active}")
    circuit = sv.CircuitSpec(m, gates, kept_qubits=(0,), discards=tuple(discards))
    return circuit, params


def reduce_image(image, circuit, params):
    """Fused 8x8 feature matrix for one prepared image."""
    feats, _ = _reduce(np.asarray(image, dtype=np.float64)[None], circuit, params,
                       want_grads=False)
    return feats[0]


def reduce_images(images, circuit, params):
    """Batched reduce_image; returns a list of ReducedFeatureMatrix."""
    feats, _ = _reduce(np.asarray(images, dtype=np.float64), circuit, params,
                       want_grads=False)
    return feats


def reduce_image_with_grads(image, circuit, params):
    """(features, d quantum_part / d theta) for one image; grads (G, G, S)."""
    feats, dq = _reduce(np.asarray(image, dtype=np.float64)[None], circuit, params,
                        want_grads=True)
    return feats[0], dq[0]


def reduce_images_with_grads(images, circuit, params):
    """Batched variant: (list of features, (B, G, G, S) gradient tensor)."""
    return _reduce(np.asarray(images, dtype=np.float64), circuit, params,
                   want_grads=True)


def _reduce(images, circuit, params, want_grads):
    if images.ndim != 3 or images.shape[1] != images.shape[2]:
        raise ConfigurationError(f"expected (batch, N, N) images, got {images.shape}")
    n = images.shape[1]
    dim = 1 << circuit.n_qubits
    r = int(np.sqrt(dim))
    if r * r != dim or n % r:
        raise ConfigurationError(
            f"circuit register ({circuit.n_qubits} qubits) does not tile side {n}")
    b = images.shape[0]
    g = n // r
    rows = _flat_patches(images, r).reshape(b * g * g, r * r)
    mask = attention_mask_rows(rows).reshape(b, g, g)
    psi0, _ = sv.encode_rows(rows)
    if want_grads:
        expect, grads, _ = sv.adjoint_gradients(circuit, params, psi0)
        nslots = grads.shape[2]
        dq = grads[:, 0, :].reshape(b, g, g, nslots)
    else:
        psi = sv.run_batch(circuit, params, psi0)
        expect = sv.expectations_batch(psi, circuit.kept_qubits)
        dq = None
    quantum = expect[:, 0].reshape(b, g, g)
    feats = [ReducedFeatureMatrix(quantum[i] * mask[i], quantum[i].copy(), mask[i])
             for i in range(b)]
    return feats, dq
