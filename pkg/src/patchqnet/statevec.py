"""Dense state-vector simulation with analytic gradients.

States are immutable values at the public API; the batched engine used
by the reduction and classification pipelines works on owned
(batch, 2**n) buffers instead, one state per row.  Gate conventions:

* qubit 0 is the least significant bit of the amplitude index;
* rotations are exp(-i * angle/2 * axis);
* controlled gates fire on control |1>, except `crx_anti` which fires
  on control |0> (open control);
* controlled-gate qubit order is (control, target), Toffoli is
  (control, control, target).

Parameter gradients are computed by adjoint (reverse-mode)
differentiation: one forward pass, then a joint backward sweep of the
state and one cost vector per measured qubit.  Gates sharing a
parameter slot accumulate into the same gradient entry.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .backend import kernels as _K
from .errors import (
    ConfigurationError,
    ContractError,
    DegenerateInputError,
    InvalidInputError,
)

PARAM_KINDS = frozenset({"rx", "ry", "rz", "crz", "crx_anti"})
FIXED_KINDS = frozenset({"h", "x", "cnot", "toffoli"})
GATE_ARITY = {
    "h": 1, "x": 1, "rx": 1, "ry": 1, "rz": 1,
    "cnot": 2, "crz": 2, "crx_anti": 2, "toffoli": 3,
}

_PAULI = {
    "rx": np.array([[0, 1], [1, 0]], dtype=complex),
    "ry": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "rz": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class GateOp:
    """One gate: kind, wires, and an optional (group, index) angle slot."""

    kind: str
    qubits: tuple
    param_slot: tuple = None

    def __post_init__(self):
        if self.kind not in GATE_ARITY:
            raise ContractError(f"unknown gate kind {self.kind!r}")
        qs = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qs)
        if len(qs) != GATE_ARITY[self.kind]:
            raise ContractError(f"{self.kind} takes {GATE_ARITY[self.kind]} qubits, got {qs}")
        if len(set(qs)) != len(qs):
            raise ContractError(f"duplicate qubit in {self.kind} on {qs}")
        rot_kind = self.kind in ("crz", "crx_anti") or self.kind in ("rx", "ry", "rz")
        if rot_kind and self.param_slot is None:
            raise ContractError(f"{self.kind} needs a param_slot")
        if not rot_kind and self.param_slot is not None:
            raise ContractError(f"{self.kind} takes no param_slot")

    @property
    def target(self):
        return self.qubits[-1]


@dataclass(frozen=True)
class CircuitSpec:
    """Ordered gate list over a fixed register.

    `kept_qubits` are the wires whose Z expectations form the output.
    `discards` records (gate_index, qubit) pairs after which a qubit is
    never acted on again; qubits stay in the register (acting on the
    complement of a subsystem cannot change its reduced observables),
    the entry just documents the structure for validation/inspection.
    """

    n_qubits: int
    gates: tuple
    kept_qubits: tuple
    discards: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "kept_qubits", tuple(int(q) for q in self.kept_qubits))
        object.__setattr__(self, "discards", tuple(self.discards))
        if not self.kept_qubits:
            raise ContractError("kept_qubits must be non-empty")
        if len(set(self.kept_qubits)) != len(self.kept_qubits):
            raise ContractError("kept_qubits must be distinct")
        for q in self.kept_qubits:
            if not 0 <= q < self.n_qubits:
                raise ContractError(f"kept qubit {q} out of range")
        for g in self.gates:
            for q in g.qubits:
                if not 0 <= q < self.n_qubits:
                    raise ContractError(f"gate {g.kind} qubit {q} out of range")
        for idx, q in self.discards:
            for later in self.gates[idx + 1:]:
                if q in later.qubits:
                    raise ContractError(f"discarded qubit {q} reappears after gate {idx}")
            if q in self.kept_qubits:
                raise ContractError(f"discarded qubit {q} is in kept_qubits")

    def param_slots(self):
        """Distinct slots in first-use order."""
        seen = []
        for g in self.gates:
            if g.param_slot is not None and g.param_slot not in seen:
                seen.append(g.param_slot)
        return seen


@dataclass
class QuantumState:
    """A pure n-qubit state as 2**n complex amplitudes (unit L2 norm)."""

    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (1 << self.n_qubits,):
            raise InvalidInputError(
                f"expected {1 << self.n_qubits} amplitudes, got shape {amps.shape}"
            )
        self.amplitudes = amps

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def copy(self):
        return QuantumState(self.n_qubits, self.amplitudes.copy())


def zero_state(n_qubits):
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return QuantumState(n_qubits, amps)


def amplitude_encode(values, n_qubits=None):
    """Encode 2**m reals as the amplitudes of an m-qubit state.

    Values are L2-normalized; index i of the input lands on basis state
    i (row-major patch order, qubit 0 least significant).  An all-zero
    input maps to |0...0> by convention.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise InvalidInputError(f"expected a flat vector, got shape {v.shape}")
    m = (len(v) - 1).bit_length()
    if len(v) == 0 or (1 << m) != len(v):
        raise InvalidInputError(f"length {len(v)} is not a power of two")
    if n_qubits is not None and n_qubits != m:
        raise InvalidInputError(f"{len(v)} values need {m} qubits, not {n_qubits}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("non-finite value in amplitude input")
    r = float(np.linalg.norm(v))
    amps = np.zeros(len(v), dtype=np.complex128)
    if r == 0.0:
        amps[0] = 1.0
    else:
        amps[:] = v / r
    return QuantumState(m, amps)


def encode_rows(values, n_qubits=None):
    """Batched amplitude encoding into an (optionally larger) register.

    values: (B, P) nonnegative-or-any reals, P a power of two.  Returns
    (psi, norms) where psi is (B, 2**n) complex128 with the normalized
    values in the first P amplitudes (remaining register qubits |0>),
    and norms the per-row L2 norms.  Zero rows become |0...0>.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2:
        raise InvalidInputError(f"expected (batch, values), got shape {v.shape}")
    p = v.shape[1]
    m = (p - 1).bit_length()
    if (1 << m) != p:
        raise InvalidInputError(f"row length {p} is not a power of two")
    n = m if n_qubits is None else int(n_qubits)
    if n < m:
        raise InvalidInputError(f"{p} values do not fit in {n} qubits")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("non-finite value in amplitude input")
    norms = np.linalg.norm(v, axis=1)
    psi = np.zeros((v.shape[0], 1 << n), dtype=np.complex128)
    nz = norms > 0.0
    psi[nz, :p] = v[nz] / norms[nz, None]
    psi[~nz, 0] = 1.0
    return psi, norms


# --- gate application -------------------------------------------------

def _rot2x2(kind, angle):
    c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
    if kind == "rx":
        return c, -1j * s, -1j * s, c
    if kind == "ry":
        return c, -s, s, c
    # rz
    return complex(c, -s), 0.0, 0.0, complex(c, s)


_H2 = (2 ** -0.5, 2 ** -0.5, 2 ** -0.5, -(2 ** -0.5))


def _apply_op(k, psi, gate, angle, invert=False):
    kind = gate.kind
    if kind == "h":
        k.apply_1q(psi, gate.qubits[0], *_H2)
    elif kind == "x":
        k.apply_1q(psi, gate.qubits[0], 0.0, 1.0, 1.0, 0.0)
    elif kind in ("rx", "ry", "rz"):
        k.apply_1q(psi, gate.qubits[0], *_rot2x2(kind, -angle if invert else angle))
    elif kind == "cnot":
        k.apply_cnot(psi, gate.qubits[0], gate.qubits[1])
    elif kind == "crz":
        m = _rot2x2("rz", -angle if invert else angle)
        k.apply_1q_ctrl(psi, gate.qubits[1], gate.qubits[0], 1, *m)
    elif kind == "crx_anti":
        m = _rot2x2("rx", -angle if invert else angle)
        k.apply_1q_ctrl(psi, gate.qubits[1], gate.qubits[0], 0, *m)
    elif kind == "toffoli":
        k.apply_toffoli(psi, gate.qubits[0], gate.qubits[1], gate.qubits[2])
    else:  # pragma: no cover - GateOp validates kinds
        raise ContractError(f"unknown gate kind {kind!r}")


def _apply_dop(k, psi, gate, angle):
    """In place: psi <- (dG/dangle) psi.  Only for parameterized kinds."""
    kind = gate.kind
    if kind in ("rx", "ry", "rz"):
        base = kind
    elif kind == "crz":
        k.project_ctrl(psi, gate.qubits[0], 1)
        base = "rz"
    elif kind == "crx_anti":
        k.project_ctrl(psi, gate.qubits[0], 0)
        base = "rx"
    else:
        raise ContractError(f"{kind} has no angle derivative")
    r = np.array(_rot2x2(base, angle), dtype=complex).reshape(2, 2)
    d = -0.5j * (_PAULI[base] @ r)
    k.apply_1q(psi, gate.target, d[0, 0], d[0, 1], d[1, 0], d[1, 1])


def _resolve_angles(circuit, params):
    angles = []
    for g in circuit.gates:
        if g.param_slot is None:
            angles.append(0.0)
        else:
            try:
                angles.append(params.value(g.param_slot))
            except (KeyError, IndexError, AttributeError) as exc:
                raise ConfigurationError(f"unresolvable param slot {g.param_slot}") from exc
    return angles


def apply_gate(state, gate, angle=None):
    """Apply one gate to a state, returning the new state."""
    parameterized = gate.kind in PARAM_KINDS
    if parameterized and angle is None:
        raise ContractError(f"{gate.kind} requires an angle")
    if not parameterized and angle is not None:
        raise ContractError(f"{gate.kind} takes no angle")
    for q in gate.qubits:
        if q >= state.n_qubits:
            raise ContractError(f"qubit {q} outside a {state.n_qubits}-qubit register")
    psi = state.amplitudes.reshape(1, -1).copy()
    _apply_op(_K, psi, gate, angle if parameterized else 0.0)
    return QuantumState(state.n_qubits, psi[0])


def apply_circuit(state, circuit, params=None):
    """Run a circuit on a state, returning the final state."""
    if circuit.n_qubits != state.n_qubits:
        raise ContractError("circuit and state register sizes differ")
    angles = _resolve_angles(circuit, params)
    psi = state.amplitudes.reshape(1, -1).copy()
    for g, a in zip(circuit.gates, angles):
        _apply_op(_K, psi, g, a)
    return QuantumState(state.n_qubits, psi[0])


def expectation_z(state, qubit):
    """<Z> of one qubit; +1 for |0>, -1 for |1>."""
    if not 0 <= qubit < state.n_qubits:
        raise ContractError(f"qubit {qubit} out of range")
    return float(_K.exp_z(state.amplitudes.reshape(1, -1), qubit)[0])


# --- batched engine ---------------------------------------------------

def run_batch(circuit, params, psi0, kernels=None):
    """Apply `circuit` to every row of psi0 (B, 2**n); returns a new array."""
    k = kernels or _K
    angles = _resolve_angles(circuit, params)
    psi = np.array(psi0, dtype=np.complex128, order="C", copy=True)
    for g, a in zip(circuit.gates, angles):
        _apply_op(k, psi, g, a)
    return psi


def expectations_batch(psi, qubits, kernels=None):
    k = kernels or _K
    return np.stack([k.exp_z(psi, q) for q in qubits], axis=1)


def adjoint_gradients(circuit, params, psi0, want_input_grad=False, kernels=None):
    """Expectations and their exact parameter gradients, batched.

    psi0: (B, 2**n) initial states.  Returns (expectations (B, K),
    grads (B, K, S), amp_grads) where K = len(kept_qubits), S counts the
    circuit's trainable slots in `params` order, and amp_grads is
    d<Z_k>/d(initial amplitude) of shape (B, K, 2**n) when
    want_input_grad (valid for real initial amplitudes), else None.
    """
    k = kernels or _K
    b, dim = psi0.shape
    kept = circuit.kept_qubits
    nk = len(kept)
    angles = _resolve_angles(circuit, params)
    slots = [s for s in params.trainable_slots() if s in set(circuit.param_slots())]
    pos = {s: i for i, s in enumerate(slots)}

    psi = np.array(psi0, dtype=np.complex128, order="C", copy=True)
    for g, a in zip(circuit.gates, angles):
        _apply_op(k, psi, g, a)
    expect = np.stack([k.exp_z(psi, q) for q in kept], axis=1)

    # one cost vector per observable: lam[j] = Z_{kept[j]} |psi_final>
    lam = np.empty((nk, b, dim), dtype=np.complex128)
    for j, q in enumerate(kept):
        lam[j] = psi
        k.apply_1q(lam[j], q, 1.0, 0.0, 0.0, -1.0)

    grads = np.zeros((b, nk, len(slots)))
    lam_flat = lam.reshape(nk * b, dim)
    for g, a in zip(reversed(circuit.gates), reversed(angles)):
        _apply_op(k, psi, g, a, invert=True)
        slot = g.param_slot
        if slot is not None and slot in pos:
            mu = psi.copy()
            _apply_dop(k, mu, g, a)
            # 2*Re(<lam|mu>) without forming a complex temporary
            re = np.einsum("kbi,bi->bk", lam.real, mu.real)
            re += np.einsum("kbi,bi->bk", lam.imag, mu.imag)
            grads[:, :, pos[slot]] += 2.0 * re
        _apply_op(k, lam_flat, g, a, invert=True)

    amp_grads = None
    if want_input_grad:
        amp_grads = 2.0 * lam.real.transpose(1, 0, 2)
    return expect, grads, amp_grads


def circuit_trainable_slots(circuit, params):
    """Trainable slots of `params` used by `circuit`, in params order."""
    used = set(circuit.param_slots())
    return [s for s in params.trainable_slots() if s in used]


def grad_expectation_params(circuit, params, input_state):
    """Map trainable slot -> d<Z_k>/d(angle), one entry per kept qubit.

    With weight sharing the value is the sum over all gate occurrences
    bound to the slot.
    """
    psi0 = input_state.amplitudes.reshape(1, -1)
    _, grads, _ = adjoint_gradients(circuit, params, psi0)
    slots = circuit_trainable_slots(circuit, params)
    return {s: grads[0, :, i].copy() for i, s in enumerate(slots)}


def normalization_jacobian_apply(amp_grads, raw, norm):
    """Chain d<Z>/d(normalized amplitudes) through v -> v/||v||.

    amp_grads: (..., P) gradient w.r.t. the normalized vector; raw: (P,)
    pre-normalization input with L2 norm `norm` > 0.
    """
    unit = raw / norm
    proj = amp_grads @ unit
    return (amp_grads - proj[..., None] * unit) / norm


def grad_expectation_inputs(circuit, params, raw_inputs):
    """Jacobian of each kept-qubit <Z> w.r.t. each raw (pre-normalization) input."""
    v = np.asarray(raw_inputs, dtype=np.float64)
    r = float(np.linalg.norm(v))
    if r == 0.0:
        raise DegenerateInputError("input Jacobian undefined for the zero vector")
    state = amplitude_encode(v)
    if (1 << circuit.n_qubits) != len(v):
        raise ContractError("input length does not match the circuit register")
    _, _, amp = adjoint_gradients(circuit, params, state.amplitudes.reshape(1, -1),
                                  want_input_grad=True)
    return normalization_jacobian_apply(amp[0], v, r)
