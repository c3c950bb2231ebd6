"""Dense state-vector simulator for up to 24 qubits.

Conventions used throughout the package:

* Bit ordering: qubit 0 is the MOST significant bit of the basis index,
  so for 3 qubits the basis state |q0 q1 q2> = |100> has index 4.
* Rotations: R_a(theta) = exp(-i * theta * sigma_a / 2) for a in {x,y,z}.
* Global phase is never normalized away; tests that depend on phase
  must compare probabilities/expectations or quotient out the phase.

The public operations work on `StateVector` instances.  The private
``_apply_*_kernel`` functions operate on raw complex arrays with an
optional leading batch axis and are reused by the model layer to
evaluate many circuit instances at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_QUBITS = 24
_UNITARY_TOL = 1e-12


class ContractViolation(ValueError):
    """A caller broke an operation contract (e.g. non-unitary gate)."""


# ---------------------------------------------------------------------------
# Fixed gate matrices
# ---------------------------------------------------------------------------

ID2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)


def rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    p = np.exp(-1j * theta / 2)
    return np.array([[p, 0], [0, np.conj(p)]])


def u3(theta: float, phi: float, lam: float) -> np.ndarray:
    """General single-qubit gate Rz(phi) Rx(-pi/2) Rz(theta) Rx(pi/2) Rz(lam)."""
    return rz(phi) @ rx(-np.pi / 2) @ rz(theta) @ rx(np.pi / 2) @ rz(lam)


def controlled(u: np.ndarray, control_state: int = 1) -> np.ndarray:
    """4x4 controlled-U with the control on the FIRST (block-MSB) qubit.

    ``control_state=1`` is the usual filled-circle control; ``0`` activates
    the gate when the control qubit is |0>.
    """
    out = np.eye(4, dtype=complex)
    if control_state == 1:
        out[2:, 2:] = u
    elif control_state == 0:
        out[:2, :2] = u
    else:
        raise ValueError(f"control_state must be 0 or 1, got {control_state}")
    return out


_XX = np.kron(PAULI_X, PAULI_X)
_YY = np.kron(PAULI_Y, PAULI_Y)
_ZZ = np.kron(PAULI_Z, PAULI_Z)
_EYE4 = np.eye(4, dtype=complex)


def pauli_string_exp(coeff_x: float, coeff_y: float, coeff_z: float) -> np.ndarray:
    """exp(i * (cx XX + cy YY + cz ZZ)) - the three terms commute."""
    out = np.cos(coeff_x) * _EYE4 + 1j * np.sin(coeff_x) * _XX
    out = (np.cos(coeff_y) * _EYE4 + 1j * np.sin(coeff_y) * _YY) @ out
    return (np.cos(coeff_z) * _EYE4 + 1j * np.sin(coeff_z) * _ZZ) @ out


def is_unitary(m: np.ndarray, tol: float = _UNITARY_TOL) -> bool:
    d = m.shape[0]
    return bool(np.all(np.abs(m.conj().T @ m - np.eye(d)) <= tol + 1e-15))


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GateMatrix:
    """A validated 2x2 or 4x4 unitary."""

    arity: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.arity not in (1, 2):
            raise ValueError(f"arity must be 1 or 2, got {self.arity}")
        m = np.asarray(self.entries, dtype=complex)
        d = 2**self.arity
        if m.shape != (d, d):
            raise ValueError(f"expected {d}x{d} matrix, got {m.shape}")
        if not is_unitary(m):
            raise ContractViolation("gate matrix is not unitary within 1e-12")
        object.__setattr__(self, "entries", m)


@dataclass
class StateVector:
    """Dense complex amplitudes over 2**n_qubits basis states."""

    n_qubits: int
    amplitudes: np.ndarray

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


def init_zero(n_qubits: int) -> StateVector:
    """|0...0> on ``n_qubits`` qubits."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


# ---------------------------------------------------------------------------
# Kernels (raw arrays, optional leading batch axis)
# ---------------------------------------------------------------------------


def _apply_1q_kernel(amps: np.ndarray, u: np.ndarray, target: int, n: int) -> np.ndarray:
    batch = amps.shape[:-1]
    nb = len(batch)
    view = amps.reshape(batch + (2**target, 2, 2 ** (n - target - 1)))
    perm = tuple(range(nb)) + (nb, nb + 2, nb + 1)
    v = view.transpose(perm).reshape(-1, 2)
    out = v @ u.T
    out = out.reshape(batch + (2**target, 2 ** (n - target - 1), 2))
    return out.transpose(perm).reshape(batch + (2**n,))


def _reorder_2q(u: np.ndarray, swap: bool) -> np.ndarray:
    """Swap the two roles of a (..., 4, 4) gate matrix when needed."""
    if not swap:
        return u
    shape = u.shape[:-2]
    u4 = u.reshape(shape + (2, 2, 2, 2))
    nd = len(shape)
    u4 = u4.transpose(tuple(range(nd)) + (nd + 1, nd, nd + 3, nd + 2))
    return u4.reshape(shape + (4, 4))


def _apply_2q_kernel(
    amps: np.ndarray, u: np.ndarray, qa: int, qb: int, n: int
) -> np.ndarray:
    """Apply a 4x4 gate to qubits (qa, qb) of (..., 2^n) amplitudes.

    ``u`` is (4, 4) or (V, 4, 4) with V matching the leading axis of
    ``amps`` (one gate variant per leading slice).
    """
    if qa > qb:
        u = _reorder_2q(u, True)
        qa, qb = qb, qa
    shape = amps.shape
    pre, mid, post = 2**qa, 2 ** (qb - qa - 1), 2 ** (n - qb - 1)
    if u.ndim == 2:
        flat = amps.reshape(-1, 2**n)
        ut = u.T
        # keep the gather/scatter working set inside the cache
        chunk = max(1, 2 ** max(14 - n, 0))
        out = np.empty_like(flat)
        for s in range(0, flat.shape[0], chunk):
            view = flat[s : s + chunk].reshape(-1, pre, 2, mid, 2, post)
            v = view.transpose(0, 1, 3, 5, 2, 4).reshape(-1, 4)
            o = (v @ ut).reshape(-1, pre, mid, post, 2, 2)
            out[s : s + chunk] = o.transpose(0, 1, 4, 2, 5, 3).reshape(
                -1, 2**n
            )
        return out.reshape(shape)
    view = amps.reshape(u.shape[0], -1, pre, 2, mid, 2, post)
    v = view.transpose(0, 1, 2, 4, 6, 3, 5)
    rows = v.shape[1] * pre * mid * post
    out = np.matmul(v.reshape(u.shape[0], rows, 4), u.transpose(0, 2, 1))
    out = out.reshape(u.shape[0], -1, pre, mid, post, 2, 2)
    return out.transpose(0, 1, 2, 5, 3, 6, 4).reshape(shape)


def _readout_kernel(amps: np.ndarray, qubit: int, n: int):
    batch = amps.shape[:-1]
    view = amps.reshape(batch + (2**qubit, 2, 2 ** (n - qubit - 1)))
    probs = np.abs(view) ** 2
    p0 = probs[..., :, 0, :].sum(axis=(-2, -1))
    p1 = probs[..., :, 1, :].sum(axis=(-2, -1))
    return p0, p1


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def apply_1q(state: StateVector, gate: GateMatrix, target: int) -> StateVector:
    """Apply a single-qubit gate to ``target``."""
    if gate.arity != 1:
        raise ValueError("apply_1q needs an arity-1 gate")
    if not 0 <= target < state.n_qubits:
        raise ValueError(f"target {target} out of range for {state.n_qubits} qubits")
    amps = _apply_1q_kernel(state.amplitudes, gate.entries, target, state.n_qubits)
    return StateVector(state.n_qubits, amps)


def apply_2q(state: StateVector, gate: GateMatrix, q_a: int, q_b: int) -> StateVector:
    """Apply a two-qubit gate; ``q_a`` is the gate's first (block-MSB) role."""
    if gate.arity != 2:
        raise ValueError("apply_2q needs an arity-2 gate")
    n = state.n_qubits
    if not (0 <= q_a < n and 0 <= q_b < n):
        raise ValueError(f"qubit index out of range for {n} qubits: ({q_a}, {q_b})")
    if q_a == q_b:
        raise ValueError("q_a and q_b must differ")
    amps = _apply_2q_kernel(state.amplitudes, gate.entries, q_a, q_b, n)
    return StateVector(n, amps)


def readout(state: StateVector, qubit: int):
    """Marginal measurement statistics (p0, p1, <Z>) of one qubit.

    The remaining qubits are summed over, which is exactly the partial
    trace of the full density matrix for a diagonal single-qubit
    observable.
    """
    if not 0 <= qubit < state.n_qubits:
        raise ValueError(f"qubit {qubit} out of range for {state.n_qubits} qubits")
    p0, p1 = _readout_kernel(state.amplitudes, qubit, state.n_qubits)
    return float(p0), float(p1), float(p0 - p1)
