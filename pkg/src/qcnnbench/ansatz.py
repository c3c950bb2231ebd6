"""Two-qubit circuit templates for convolution and pooling blocks.

A template is an ordered list of gate operations on the block's two
qubit roles (role 0 = first qubit = block MSB).  Parameterized gates
reference integer parameter slots; binding a vector of angles yields a
concrete 4x4 unitary.

Per-block parameter counts are fixed by the model zoo:

    c1:2  c2:2  c3:4  c4:6  c5:6  c6:6  c7:10  c8:10  c9:15  pool:2

Every parameter slot carries a gradient shift rule:

* ``rot``  - generator spectrum {+-1/2}: two-term rule at +-pi/2.
* ``ctrl`` - controlled rotation, generator spectrum {0, +-1/2}:
  four-term rule at +-pi/2 and +-3pi/2.
* ``pexp`` - exp(i * theta * P) with P^2 = I: two-term rule at +-pi/4.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simulator import (
    CNOT,
    CZ,
    GateMatrix,
    HADAMARD,
    SWAP,
    controlled,
    pauli_string_exp,
    rx,
    ry,
    rz,
    u3,
)

CONV_IDS = ("c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8", "c9")
ANSATZ_IDS = ("c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8", "c9a", "c9b")

CONV_PARAM_COUNTS = {
    "c1": 2, "c2": 2, "c3": 4, "c4": 6, "c5": 6,
    "c6": 6, "c7": 10, "c8": 10, "c9": 15,
}
POOL_PARAM_COUNT = 2

# Gradient shift rules, see parameter-shift implementation in training.py.
SHIFT_ROT = "rot"
SHIFT_CTRL = "ctrl"
SHIFT_PEXP = "pexp"

_ROTATIONS = {"rx": rx, "ry": ry, "rz": rz}


@dataclass(frozen=True)
class GateOp:
    """One gate inside a two-qubit template.

    kind: h | rx | ry | rz | u3 | cx | cz | crx | crz | nxyz
    qubits: roles the gate touches, as a tuple drawn from (0, 1); for
        controlled gates the first entry is the control role.
    slots: parameter slot indices consumed by the gate (may be empty).
    control_state: 1 = filled control, 0 = open control (cr* only).
    """

    kind: str
    qubits: tuple
    slots: tuple = ()
    control_state: int = 1


@dataclass(frozen=True)
class CircuitTemplate:
    name: str
    gate_ops: tuple
    param_count: int

    def slot_rules(self):
        """Shift rule per parameter slot, in slot order."""
        rules = [None] * self.param_count
        for op in self.gate_ops:
            for s in op.slots:
                if op.kind in ("crx", "crz"):
                    rules[s] = SHIFT_CTRL
                elif op.kind == "nxyz":
                    rules[s] = SHIFT_PEXP
                else:
                    rules[s] = SHIFT_ROT
        return tuple(rules)


def _embed_1q(u: np.ndarray, role: int) -> np.ndarray:
    # hand-rolled kron with the identity: bind() is the training hot path
    out = np.zeros((4, 4), dtype=complex)
    if role == 0:
        out[0, 0] = out[1, 1] = u[0, 0]
        out[0, 2] = out[1, 3] = u[0, 1]
        out[2, 0] = out[3, 1] = u[1, 0]
        out[2, 2] = out[3, 3] = u[1, 1]
    else:
        out[0:2, 0:2] = u
        out[2:4, 2:4] = u
    return out


def _op_matrix(op: GateOp, params: np.ndarray) -> np.ndarray:
    kind = op.kind
    if kind == "h":
        return _embed_1q(HADAMARD, op.qubits[0])
    if kind in _ROTATIONS:
        return _embed_1q(_ROTATIONS[kind](params[op.slots[0]]), op.qubits[0])
    if kind == "u3":
        s0, s1, s2 = op.slots
        return _embed_1q(u3(params[s0], params[s1], params[s2]), op.qubits[0])
    if kind == "cx":
        m = CNOT
    elif kind == "cz":
        m = CZ
    elif kind in ("crx", "crz"):
        rot = rx if kind == "crx" else rz
        m = controlled(rot(params[op.slots[0]]), op.control_state)
    elif kind == "nxyz":
        s0, s1, s2 = op.slots
        return pauli_string_exp(params[s0], params[s1], params[s2])
    else:
        raise ValueError(f"unknown gate kind {kind!r}")
    if op.qubits[0] == 1:  # control on the second role: conjugate by SWAP
        m = SWAP @ m @ SWAP
    return m


def bind_raw(template: CircuitTemplate, params) -> np.ndarray:
    """Compose the template into a plain 4x4 array (no validation)."""
    params = np.asarray(params, dtype=float)
    if params.shape != (template.param_count,):
        raise ValueError(
            f"{template.name} needs {template.param_count} parameters, "
            f"got {params.shape}"
        )
    m = np.eye(4, dtype=complex)
    for op in template.gate_ops:
        m = _op_matrix(op, params) @ m
    return m


def bind(template: CircuitTemplate, params) -> GateMatrix:
    """Bind parameters and return a validated two-qubit gate."""
    return GateMatrix(2, bind_raw(template, params))


def _layer(kind, s0, s1):
    return (GateOp(kind, (0,), (s0,)), GateOp(kind, (1,), (s1,)))


_TEMPLATES = {
    # TTN block: Ry on each qubit, then CNOT.
    "c1": (*_layer("ry", 0, 1), GateOp("cx", (0, 1))),
    # Entangle first (H,H + CZ), then one Rx per qubit.
    "c2": (
        GateOp("h", (0,)),
        GateOp("h", (1,)),
        GateOp("cz", (0, 1)),
        *_layer("rx", 0, 1),
    ),
    # Rx and Rz layers closed by a CNOT.
    "c3": (*_layer("rx", 0, 1), *_layer("rz", 2, 3), GateOp("cx", (0, 1))),
    # Ry layers alternating with counter-rotating controlled-Rz.
    "c4": (
        *_layer("ry", 0, 1),
        GateOp("crz", (1, 0), (2,)),
        *_layer("ry", 3, 4),
        GateOp("crz", (0, 1), (5,)),
    ),
    "c5": (
        *_layer("ry", 0, 1),
        GateOp("crx", (1, 0), (2,)),
        *_layer("ry", 3, 4),
        GateOp("crx", (0, 1), (5,)),
    ),
    # Real-valued block: Ry layers alternating with CNOTs lies in SO(4).
    "c6": (
        *_layer("ry", 0, 1),
        GateOp("cx", (0, 1)),
        *_layer("ry", 2, 3),
        GateOp("cx", (0, 1)),
        *_layer("ry", 4, 5),
    ),
    # Rx+Rz layers around both-direction controlled-Rz.
    "c7": (
        *_layer("rx", 0, 1),
        *_layer("rz", 2, 3),
        GateOp("crz", (1, 0), (4,)),
        GateOp("crz", (0, 1), (5,)),
        *_layer("rx", 6, 7),
        *_layer("rz", 8, 9),
    ),
    "c8": (
        *_layer("rx", 0, 1),
        *_layer("rz", 2, 3),
        GateOp("crx", (1, 0), (4,)),
        GateOp("crx", (0, 1), (5,)),
        *_layer("rx", 6, 7),
        *_layer("rz", 8, 9),
    ),
    # KAK form of an arbitrary two-qubit gate: local pair, XX+YY+ZZ
    # exponential, local pair.  15 parameters.
    "c9": (
        GateOp("u3", (0,), (0, 1, 2)),
        GateOp("u3", (1,), (3, 4, 5)),
        GateOp("nxyz", (0, 1), (6, 7, 8)),
        GateOp("u3", (0,), (9, 10, 11)),
        GateOp("u3", (1,), (12, 13, 14)),
    ),
}


def build_conv(ansatz_id: str) -> CircuitTemplate:
    """Convolution template for an ansatz id (c1..c9; c9a/c9b share c9)."""
    key = ansatz_id.lower()
    if key in ("c9a", "c9b"):
        key = "c9"
    if key not in _TEMPLATES:
        raise ValueError(f"unknown ansatz id {ansatz_id!r}")
    return CircuitTemplate(key, _TEMPLATES[key], CONV_PARAM_COUNTS[key])


def build_pool() -> CircuitTemplate:
    """Pooling block: CRz with filled control, CRx with open control.

    The control (role 0) is the qubit that gets discarded afterwards.
    """
    ops = (
        GateOp("crz", (0, 1), (0,), control_state=1),
        GateOp("crx", (0, 1), (1,), control_state=0),
    )
    return CircuitTemplate("pool", ops, POOL_PARAM_COUNT)


def conv_param_count(ansatz_id: str) -> int:
    key = ansatz_id.lower()
    if key in ("c9a", "c9b"):
        key = "c9"
    if key not in CONV_PARAM_COUNTS:
        raise ValueError(f"unknown ansatz id {ansatz_id!r}")
    return CONV_PARAM_COUNTS[key]


def has_pool_gates(ansatz_id: str) -> bool:
    """Ansatz 9b drops the parameterized pooling gates (trace only)."""
    return ansatz_id.lower() != "c9b"
