"""Circuit builders: two-qubit ansatzes and the layers assembled from them.

Every builder emits plain gate lists in application order and allocates
angle slots out of a ParameterSet, so weight sharing is explicit in the
returned structure: a shared layer binds every ansatz to the same two
slots, an unshared layer hands each ansatz fresh ones.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .statevec import GateOp

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SharingPolicy:
    """Which layers share angles across their ansatzes.

    The defaults reproduce the reference parameter counts: 8 trainable
    angles for the proposed reducer (2 per layer, 4 layers), 22 for the
    classifier (2 conv + 18 rotations + 2 pool), with the auxiliary
    rotations frozen at zero.
    """

    conv_shared: bool = True
    pool_shared: bool = True
    rotation_layer_shared: bool = False
    aux_rotations_trainable: bool = False


class ParameterSet:
    """Named groups of angles with per-group trainable flags.

    Slots are (group, index) pairs; circuits reference slots, never raw
    values, so one slot feeding several gates is weight sharing.
    """

    def __init__(self):
        self._groups = {}
        self._trainable = {}

    def add_group(self, name, size, trainable=True, values=None):
        """Allocate `size` angles under `name`; returns the slot list."""
        if name in self._groups:
            raise ContractError(f"parameter group {name!r} already exists")
        if size <= 0:
            raise ContractError("parameter group must be non-empty")
        if values is None:
            vals = np.zeros(size, dtype=np.float64)
        else:
            vals = np.array(values, dtype=np.float64)
            if vals.shape != (size,):
                raise ContractError(f"group {name!r}: {size} values expected")
        self._groups[name] = vals
        self._trainable[name] = bool(trainable)
        return [(name, i) for i in range(size)]

    def group_names(self):
        return list(self._groups)

    def group_values(self, name):
        return self._groups[name].copy()

    def is_trainable(self, name):
        return self._trainable[name]

    def set_group_values(self, name, values):
        vals = np.asarray(values, dtype=np.float64)
        if name not in self._groups or vals.shape != self._groups[name].shape:
            raise ContractError(f"group {name!r} mismatch: {vals.shape}")
        self._groups[name][:] = vals

    def value(self, slot):
        name, idx = slot
        return float(self._groups[name][idx])

    def set_value(self, slot, angle):
        name, idx = slot
        self._groups[name][idx] = angle

    def trainable_slots(self):
        """All trainable (group, index) slots in allocation order."""
        out = []
        for name, vals in self._groups.items():
            if self._trainable[name]:
                out.extend((name, i) for i in range(len(vals)))
        return out

    def total_trainable(self):
        return sum(len(v) for n, v in self._groups.items() if self._trainable[n])

    def vector(self):
        """Trainable angles flattened in allocation order."""
        parts = [v for n, v in self._groups.items() if self._trainable[n]]
        if not parts:
            return np.zeros(0)
        return np.concatenate(parts)

    def set_vector(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.total_trainable(),):
            raise ContractError(f"expected {self.total_trainable()} angles, got {vec.shape}")
        at = 0
        for name, vals in self._groups.items():
            if self._trainable[name]:
                vals[:] = vec[at:at + len(vals)]
                at += len(vals)

    def randomize(self, rng, low=0.0, high=TWO_PI):
        """Draw fresh uniform angles for every trainable group."""
        for name, vals in self._groups.items():
            if self._trainable[name]:
                vals[:] = rng.uniform(low, high, size=len(vals))

    def copy(self):
        out = ParameterSet()
        for name, vals in self._groups.items():
            out.add_group(name, len(vals), self._trainable[name], vals)
        return out

    def dump(self):
        """Group arrays plus flags, for checkpointing."""
        return (
            {n: v.copy() for n, v in self._groups.items()},
            dict(self._trainable),
        )

    @classmethod
    def restore(cls, groups, trainable):
        out = cls()
        for name, vals in groups.items():
            out.add_group(name, len(vals), trainable[name], vals)
        return out


# --- two-qubit ansatzes ----------------------------------------------

def conv_ansatz(q_a, q_b, slots):
    """Entangle-then-rotate pair: H both, CNOT a->b, Rx on each."""
    if q_a == q_b:
        raise ContractError("conv ansatz needs two distinct qubits")
    s1, s2 = slots
    return [
        GateOp("h", (q_a,)),
        GateOp("h", (q_b,)),
        GateOp("cnot", (q_a, q_b)),
        GateOp("rx", (q_a,), s1),
        GateOp("rx", (q_b,), s2),
    ]


def pool_ansatz(q_keep, q_drop, slots):
    """Fold q_drop into q_keep: CRz, X on q_drop, then open-control Rx."""
    if q_keep == q_drop:
        raise ContractError("pool ansatz needs two distinct qubits")
    s1, s2 = slots
    return [
        GateOp("crz", (q_drop, q_keep), s1),
        GateOp("x", (q_drop,)),
        GateOp("crx_anti", (q_drop, q_keep), s2),
    ]


# --- layers -----------------------------------------------------------

def _pair_slots(params, group_name, shared, n_pairs):
    if shared:
        slots = params.add_group(group_name, 2)
        return [slots] * n_pairs
    slots = params.add_group(group_name, 2 * n_pairs)
    return [slots[2 * i:2 * i + 2] for i in range(n_pairs)]


def conv_layer_pairs(qubits):
    """Pairings for one conv layer: adjacent pass then mirror pass."""
    m = len(qubits)
    if m < 2 or m % 2:
        raise ContractError(f"conv layer needs an even count >= 2, got {m}")
    if m == 2:
        return [(qubits[0], qubits[1])]
    sub1 = [(qubits[i], qubits[i + 1]) for i in range(0, m, 2)]
    sub2 = [(qubits[i], qubits[m - 1 - i]) for i in range(m // 2)]
    return sub1 + sub2


def build_conv_layer(qubits, policy, group_name, params):
    """Tile the conv ansatz over the active qubits (two sub-layers)."""
    pairs = conv_layer_pairs(qubits)
    slot_per_pair = _pair_slots(params, group_name, policy.conv_shared, len(pairs))
    gates = []
    for (a, b), slots in zip(pairs, slot_per_pair):
        gates.extend(conv_ansatz(a, b, slots))
    return gates


def build_pool_layer(qubits, policy, group_name, params):
    """Pool consecutive pairs, keeping the first qubit of each."""
    m = len(qubits)
    if m < 2 or m % 2:
        raise ContractError(f"pool layer needs an even count >= 2, got {m}")
    pairs = [(qubits[i], qubits[i + 1]) for i in range(0, m, 2)]
    slot_per_pair = _pair_slots(params, group_name, policy.pool_shared, len(pairs))
    gates = []
    for (keep, drop), slots in zip(pairs, slot_per_pair):
        gates.extend(pool_ansatz(keep, drop, slots))
    return gates, [keep for keep, _ in pairs]


def build_toffoli_layer(n):
    """Basis-permuting entangler on qubits 0..n-1.

    1-indexed reading: T(t1; c2, cn), T(t2; c n-1, c n), then
    T(tk; c k-1, c k-2) for k = 3..n.
    """
    if n < 3:
        raise ContractError(f"toffoli layer needs >= 3 qubits, got {n}")
    triples = [(1, n - 1, 0), (n - 2, n - 1, 1)]
    triples += [(k - 1, k - 2, k) for k in range(2, n)]
    return [GateOp("toffoli", t) for t in triples]


def build_rotation_layer(qubits, policy, group_name, params):
    """Rx on every qubit, then Ry, then Rz."""
    if not qubits:
        raise ContractError("rotation layer needs at least one qubit")
    m = len(qubits)
    if policy.rotation_layer_shared:
        slots = params.add_group(group_name, 3)
        per_axis = [[slots[ax]] * m for ax in range(3)]
    else:
        slots = params.add_group(group_name, 3 * m)
        per_axis = [slots[ax * m:(ax + 1) * m] for ax in range(3)]
    gates = []
    for axis, kind in enumerate(("rx", "ry", "rz")):
        gates.extend(GateOp(kind, (q,), per_axis[axis][i]) for i, q in enumerate(qubits))
    return gates


def build_aux_interaction(data_kept, aux):
    """Copy data-qubit parity onto the auxiliaries, then scramble back.

    data_kept must be the three surviving data qubits (low to high),
    aux the two readout qubits.
    """
    if len(data_kept) != 3 or len(aux) != 2:
        raise ContractError("aux interaction expects 3 data qubits and 2 auxiliaries")
    q1, q3, q5 = data_kept
    a1, a2 = aux
    if len({q1, q3, q5, a1, a2}) != 5:
        raise ContractError("aux interaction qubits must be distinct")
    return [
        GateOp("cnot", (q5, a2)),
        GateOp("cnot", (q3, a1)),
        GateOp("cnot", (q3, q5)),
        GateOp("cnot", (q1, q3)),
        GateOp("toffoli", (q3, q5, q1)),
    ]


def build_aux_rotations(aux, policy, params, group_name="aux_rot"):
    """Shared Rx, Ry, Rz on each auxiliary; frozen at 0 unless enabled."""
    if not aux:
        raise ContractError("aux rotations need at least one qubit")
    slots = params.add_group(group_name, 3, trainable=policy.aux_rotations_trainable)
    gates = []
    for kind, slot in zip(("rx", "ry", "rz"), slots):
        gates.extend(GateOp(kind, (q,), slot) for q in aux)
    return gates
