"""Classification heads over the 8x8 fused feature matrix.

The quantum head amplitude-encodes the 64 features into 6 data qubits
of an 8-qubit register (2 idle auxiliaries), runs a fixed circuit
(conv, Toffoli, rotations, Toffoli, pool, data-to-aux interaction), and
reads class scores as the auxiliaries' <Z>.  The classical baseline is
a 64-8-4-2 fully connected net with ReLU hidden activations.  Both
heads end in a softmax.
"""

from dataclasses import dataclass

import numpy as np

from . import statevec as sv
from .ansatz import (
    ParameterSet,
    SharingPolicy,
    build_aux_interaction,
    build_aux_rotations,
    build_conv_layer,
    build_pool_layer,
    build_rotation_layer,
    build_toffoli_layer,
)
from .errors import ConfigurationError, ContractError, DegenerateInputError

N_DATA_QUBITS = 6
AUX_QUBITS = (6, 7)
N_FEATURES = 1 << N_DATA_QUBITS
FCC_LAYER_SIZES = (N_FEATURES, 8, 4, 2)


@dataclass(frozen=True)
class ClassifierOutput:
    """Per-class scores and their softmax.

    For the quantum head the scores are auxiliary-qubit <Z> values in
    [-1, 1]; for the classical head they are unbounded logits.
    """

    expectations: np.ndarray
    probabilities: np.ndarray


def softmax(x):
    e = np.exp(x - np.max(x, axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def build_classifier_circuit(n_data=N_DATA_QUBITS, n_classes=2, policy=None, params=None):
    """The 8-qubit classifier circuit; returns (CircuitSpec, ParameterSet)."""
    if (n_data, n_classes) != (N_DATA_QUBITS, 2):
        raise ConfigurationError(
            f"classifier circuit is defined for 6 data qubits / 2 classes, "
            f"got ({n_data}, {n_classes})")
    policy = policy or SharingPolicy()
    params = params if params is not None else ParameterSet()
    dataq = list(range(N_DATA_QUBITS))
    gates = build_conv_layer(dataq, policy, "conv", params)
    gates += build_toffoli_layer(N_DATA_QUBITS)
    gates += build_rotation_layer(dataq, policy, "rot", params)
    gates += build_toffoli_layer(N_DATA_QUBITS)
    pool, kept = build_pool_layer(dataq, policy, "pool", params)
    gates += pool
    discards = [(len(gates) - 1, q) for q in dataq if q not in kept]
    gates += build_aux_interaction(kept, list(AUX_QUBITS))
    discards += [(len(gates) - 1, q) for q in kept]
    gates += build_aux_rotations(list(AUX_QUBITS), policy, params)
    circuit = sv.CircuitSpec(N_DATA_QUBITS + len(AUX_QUBITS), gates,
                             kept_qubits=AUX_QUBITS, discards=tuple(discards))
    return circuit, params


def _feature_rows(features):
    """Features (one or a batch of gamma matrices / 64-vectors) -> (B, 64)."""
    if hasattr(features, "gamma"):
        features = features.gamma
    elif isinstance(features, (list, tuple)) and features and hasattr(features[0], "gamma"):
        features = np.stack([f.gamma for f in features])
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1 or x.shape == (8, 8)
    rows = x.reshape(1, -1) if single else x.reshape(x.shape[0], -1)
    if rows.shape[1] != N_FEATURES:
        raise ConfigurationError(f"expected {N_FEATURES} features, got shape {x.shape}")
    return rows, single


def classify_batch(features, circuit, params):
    """Quantum head forward pass: (expectations, probabilities), batched."""
    rows, _ = _feature_rows(features)
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0.0):
        raise DegenerateInputError("all-zero feature matrix cannot be encoded")
    psi0, _ = sv.encode_rows(rows, n_qubits=circuit.n_qubits)
    psi = sv.run_batch(circuit, params, psi0)
    expect = sv.expectations_batch(psi, circuit.kept_qubits)
    return expect, softmax(expect)


def classify(features, circuit, params):
    expect, probs = classify_batch(features, circuit, params)
    return ClassifierOutput(expect[0], probs[0])


def classify_batch_grads(features, circuit, params):
    """Forward plus d expectations / d theta and / d raw gamma.

    Returns (expectations (B, A), probabilities, dtheta (B, A, S),
    dgamma (B, A, 64)); the gamma gradient is chained through the L2
    normalization of the raw feature vector.
    """
    rows, _ = _feature_rows(features)
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0.0):
        raise DegenerateInputError("all-zero feature matrix cannot be encoded")
    psi0, _ = sv.encode_rows(rows, n_qubits=circuit.n_qubits)
    expect, dtheta, amp = sv.adjoint_gradients(circuit, params, psi0,
                                               want_input_grad=True)
    amp = amp[:, :, :N_FEATURES]
    unit = rows / norms[:, None]
    proj = np.einsum("bki,bi->bk", amp, unit)
    dgamma = (amp - proj[:, :, None] * unit[:, None, :]) / norms[:, None, None]
    return expect, softmax(expect), dtheta, dgamma


def classify_grads(features, circuit, params):
    expect, probs, dtheta, dgamma = classify_batch_grads(features, circuit, params)
    return ClassifierOutput(expect[0], probs[0]), dtheta[0], dgamma[0]


# --- classical fully connected baseline --------------------------------

class FccParams:
    """Weights and biases of the 64-8-4-2 net (566 scalars)."""

    def __init__(self, weights=None, biases=None):
        sizes = FCC_LAYER_SIZES
        if weights is None:
            weights = [np.zeros((sizes[i + 1], sizes[i])) for i in range(3)]
            biases = [np.zeros(sizes[i + 1]) for i in range(3)]
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]
        for i in range(3):
            if self.weights[i].shape != (sizes[i + 1], sizes[i]):
                raise ContractError(f"layer {i} weight shape {self.weights[i].shape}")
            if self.biases[i].shape != (sizes[i + 1],):
                raise ContractError(f"layer {i} bias shape {self.biases[i].shape}")

    @classmethod
    def initialized(cls, rng):
        """Damped He start: quarter-scale hidden weights, zero readout.

        The training loss is summed over the batch, so a net that is
        confidently wrong early sees update spikes large enough (with
        momentum, at the high initial learning rate) to drive whole
        ReLU layers negative permanently.  A zero readout makes the
        first predictions exactly uniform, damped first-layer weights
        keep logits growing slowly while the reducer features settle,
        and an all-positive middle layer plus small positive biases
        start every unit active (inputs are nonnegative, so a unit only
        dies once its whole row has been pushed negative).  This lowers
        the collapse rate but does not remove it; see the training
        notes in the README.
        """
        sizes = FCC_LAYER_SIZES
        w1 = 0.3 * rng.normal(0.0, np.sqrt(2.0 / sizes[0]), (sizes[1], sizes[0]))
        w2 = np.abs(0.3 * rng.normal(0.0, np.sqrt(2.0 / sizes[1]),
                                     (sizes[2], sizes[1])))
        w3 = np.zeros((sizes[3], sizes[2]))
        biases = [np.full(sizes[1], 0.1), np.full(sizes[2], 0.1),
                  np.zeros(sizes[3])]
        return cls([w1, w2, w3], biases)

    def count(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def vector(self):
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts += [w.ravel(), b]
        return np.concatenate(parts)

    def set_vector(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.count(),):
            raise ContractError(f"expected {self.count()} scalars, got {vec.shape}")
        at = 0
        for w, b in zip(self.weights, self.biases):
            w[:] = vec[at:at + w.size].reshape(w.shape)
            at += w.size
            b[:] = vec[at:at + b.size]
            at += b.size

    def copy(self):
        return FccParams([w.copy() for w in self.weights],
                         [b.copy() for b in self.biases])

    def dump(self):
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases), start=1):
            out[f"w{i}"] = w.copy()
            out[f"b{i}"] = b.copy()
        return out

    @classmethod
    def restore(cls, arrays):
        return cls([arrays[f"w{i}"] for i in (1, 2, 3)],
                   [arrays[f"b{i}"] for i in (1, 2, 3)])


def fcc_forward_batch(features, fcc):
    """Returns (logits, probabilities, cache for fcc_backward).

    The raw feature vector is L2-normalized per sample first — the same
    re-encoding boundary the quantum head reads through amplitude
    encoding — so both heads see identical inputs and predictions are
    invariant under positive scaling of the feature matrix.
    """
    rows, _ = _feature_rows(features)
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0.0):
        raise DegenerateInputError("all-zero feature matrix cannot be encoded")
    x = rows / norms[:, None]
    h1 = np.maximum(x @ fcc.weights[0].T + fcc.biases[0], 0.0)
    h2 = np.maximum(h1 @ fcc.weights[1].T + fcc.biases[1], 0.0)
    logits = h2 @ fcc.weights[2].T + fcc.biases[2]
    return logits, softmax(logits), (x, h1, h2, norms)


def fcc_forward(features, fcc):
    logits, probs, _ = fcc_forward_batch(features, fcc)
    return ClassifierOutput(logits[0], probs[0])


def fcc_backward(fcc, cache, dlogits):
    """Backprop through the net: (parameter grad vector, d loss / d raw x).

    The input gradient is chained through the L2 normalization, exactly
    as the quantum head's input Jacobian is.
    """
    x, h1, h2, norms = cache
    dz3 = np.asarray(dlogits, dtype=np.float64)
    dw3 = dz3.T @ h2
    db3 = dz3.sum(axis=0)
    dz2 = (dz3 @ fcc.weights[2]) * (h2 > 0)
    dw2 = dz2.T @ h1
    db2 = dz2.sum(axis=0)
    dz1 = (dz2 @ fcc.weights[1]) * (h1 > 0)
    dw1 = dz1.T @ x
    db1 = dz1.sum(axis=0)
    dx = dz1 @ fcc.weights[0]
    dx = (dx - np.einsum("bi,bi->b", dx, x)[:, None] * x) / norms[:, None]
    grad = np.concatenate([dw1.ravel(), db1, dw2.ravel(), db2, dw3.ravel(), db3])
    return grad, dx
