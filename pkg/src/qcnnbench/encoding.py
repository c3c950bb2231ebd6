"""Classical-to-quantum feature maps.

Five schemes are supported.  With n qubits, m block qubits and b blocks:

* ``amplitude``  - normalized vector written into all 2^n amplitudes.
* ``qubit``      - one feature per qubit, |phi(x_i)> = cos(x_i/2)|0> + sin(x_i/2)|1>.
* ``dense``      - two features per qubit via Ry(x_{N/2+j}) Rx(x_j) |0>.
* ``hde``        - hybrid direct: per-block amplitude encoding, b*2^m features.
* ``hae``        - hybrid angle: per-block binary-tree of angles, b*(2^m - 1)
  features; the amplitude of block basis state i is
  prod_j cos^{1-i_j}(x_{g(j)}) * sin^{i_j}(x_{g(j)}) with
  g(j) = 2^j + sum_{l<j} i_l 2^l, bits i_j big-endian and features
  1-indexed inside the block.

All encoders are pure and return unit-norm states; the hybrid-angle
normalization follows from the product structure and is asserted by
tests rather than enforced by renormalization.

The ``*_batch`` functions accept a (batch, features) array and return
(batch, 2^n) amplitudes; they are the fast path used during training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simulator import StateVector

ENCODING_KINDS = ("amplitude", "qubit", "dense", "hde", "hae")


@dataclass(frozen=True)
class EncodingSpec:
    kind: str
    n_qubits: int
    block_qubits: int = 0  # hybrid only
    blocks: int = 0  # hybrid only

    def __post_init__(self):
        if self.kind not in ENCODING_KINDS:
            raise ValueError(f"unknown encoding kind {self.kind!r}")
        if self.kind in ("hde", "hae"):
            if self.blocks * self.block_qubits != self.n_qubits:
                raise ValueError(
                    "hybrid encoding needs n_qubits = blocks * block_qubits"
                )

    @property
    def feature_capacity(self) -> int:
        n, m, b = self.n_qubits, self.block_qubits, self.blocks
        return {
            "amplitude": 2**n,
            "qubit": n,
            "dense": 2 * n,
            "hde": b * 2**m if b else 0,
            "hae": b * (2**m - 1) if b else 0,
        }[self.kind]


def default_spec(kind: str, n_qubits: int = 8) -> EncodingSpec:
    """Benchmark defaults: hybrid schemes use two blocks of n/2 qubits."""
    if kind in ("hde", "hae"):
        return EncodingSpec(kind, n_qubits, block_qubits=n_qubits // 2, blocks=2)
    return EncodingSpec(kind, n_qubits)


def _as_batch(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim == 2:
        return arr, False
    raise ValueError("features must be a vector or a (batch, features) array")


# ---------------------------------------------------------------------------
# Batched encoders
# ---------------------------------------------------------------------------


def encode_amplitude_batch(x, n_qubits: int) -> np.ndarray:
    xs, _ = _as_batch(x)
    if xs.shape[1] != 2**n_qubits:
        raise ValueError(
            f"amplitude encoding on {n_qubits} qubits needs {2**n_qubits} "
            f"features, got {xs.shape[1]}"
        )
    norms = np.linalg.norm(xs, axis=1)
    if np.any(norms == 0):
        raise ValueError("amplitude encoding requires a nonzero feature vector")
    return (xs / norms[:, None]).astype(complex)


def encode_qubit_batch(x, n_qubits: int | None = None) -> np.ndarray:
    xs, _ = _as_batch(x)
    n = xs.shape[1] if n_qubits is None else n_qubits
    if xs.shape[1] != n:
        raise ValueError(f"qubit encoding expects {n} features, got {xs.shape[1]}")
    if np.any((xs < 0) | (xs >= np.pi)):
        raise ValueError("qubit encoding features must lie in [0, pi)")
    amps = np.ones((xs.shape[0], 1), dtype=complex)
    for i in range(n):
        q = np.stack([np.cos(xs[:, i] / 2), np.sin(xs[:, i] / 2)], axis=1)
        amps = (amps[:, :, None] * q[:, None, :]).reshape(xs.shape[0], -1)
    return amps


def encode_dense_batch(x) -> np.ndarray:
    xs, _ = _as_batch(x)
    nfeat = xs.shape[1]
    if nfeat % 2:
        raise ValueError("dense encoding needs an even number of features")
    half = nfeat // 2
    amps = np.ones((xs.shape[0], 1), dtype=complex)
    for j in range(half):
        # Rx by x_j then Ry by x_{half+j} applied to |0>
        c1, s1 = np.cos(xs[:, j] / 2), np.sin(xs[:, j] / 2)
        c2, s2 = np.cos(xs[:, half + j] / 2), np.sin(xs[:, half + j] / 2)
        q = np.stack([c2 * c1 + 1j * s2 * s1, s2 * c1 - 1j * c2 * s1], axis=1)
        amps = (amps[:, :, None] * q[:, None, :]).reshape(xs.shape[0], -1)
    return amps


def encode_hde_batch(x, block_qubits: int, blocks: int) -> np.ndarray:
    xs, _ = _as_batch(x)
    dim = 2**block_qubits
    if xs.shape[1] != blocks * dim:
        raise ValueError(
            f"hybrid direct encoding needs {blocks * dim} features, "
            f"got {xs.shape[1]}"
        )
    amps = np.ones((xs.shape[0], 1), dtype=complex)
    for k in range(blocks):
        blk = xs[:, k * dim : (k + 1) * dim]
        norms = np.linalg.norm(blk, axis=1)
        if np.any(norms == 0):
            raise ValueError(f"hybrid direct encoding block {k} has zero norm")
        blk = blk / norms[:, None]
        amps = (amps[:, :, None] * blk[:, None, :]).reshape(xs.shape[0], -1)
    return amps


def _hae_factor_table(m: int):
    """For each block basis state i: list of (0-based feature index, use_sin)."""
    table = []
    for i in range(2**m):
        bits = [(i >> (m - 1 - j)) & 1 for j in range(m)]
        factors = []
        for j in range(m):
            g = 2**j + sum(bits[l] * 2**l for l in range(j))
            factors.append((g - 1, bits[j]))
        table.append(factors)
    return table


def encode_hae_batch(x, block_qubits: int, blocks: int) -> np.ndarray:
    xs, _ = _as_batch(x)
    m = block_qubits
    per_block = 2**m - 1
    if xs.shape[1] != blocks * per_block:
        raise ValueError(
            f"hybrid angle encoding needs {blocks * per_block} features, "
            f"got {xs.shape[1]}"
        )
    table = _hae_factor_table(m)
    amps = np.ones((xs.shape[0], 1), dtype=complex)
    for k in range(blocks):
        blk = xs[:, k * per_block : (k + 1) * per_block]
        cos, sin = np.cos(blk), np.sin(blk)
        cols = []
        for factors in table:
            col = np.ones(xs.shape[0])
            for feat, use_sin in factors:
                col = col * (sin[:, feat] if use_sin else cos[:, feat])
            cols.append(col)
        blk_amps = np.stack(cols, axis=1)
        amps = (amps[:, :, None] * blk_amps[:, None, :]).reshape(xs.shape[0], -1)
    return amps


def encode_batch(spec: EncodingSpec, x) -> np.ndarray:
    if spec.kind == "amplitude":
        return encode_amplitude_batch(x, spec.n_qubits)
    if spec.kind == "qubit":
        return encode_qubit_batch(x, spec.n_qubits)
    if spec.kind == "dense":
        amps = encode_dense_batch(x)
        if amps.shape[1] != 2**spec.n_qubits:
            raise ValueError("dense feature count does not match qubit count")
        return amps
    if spec.kind == "hde":
        return encode_hde_batch(x, spec.block_qubits, spec.blocks)
    return encode_hae_batch(x, spec.block_qubits, spec.blocks)


# ---------------------------------------------------------------------------
# Single-vector wrappers returning StateVector
# ---------------------------------------------------------------------------


def encode_amplitude(x, n_qubits: int) -> StateVector:
    return StateVector(n_qubits, encode_amplitude_batch(x, n_qubits)[0])


def encode_qubit(x) -> StateVector:
    amps = encode_qubit_batch(x)
    return StateVector(int(np.log2(amps.shape[1])), amps[0])


def encode_dense(x) -> StateVector:
    amps = encode_dense_batch(x)
    return StateVector(int(np.log2(amps.shape[1])), amps[0])


def encode_hybrid_direct(x, block_qubits: int, blocks: int) -> StateVector:
    amps = encode_hde_batch(x, block_qubits, blocks)
    return StateVector(block_qubits * blocks, amps[0])


def encode_hybrid_angle(x, block_qubits: int, blocks: int) -> StateVector:
    amps = encode_hae_batch(x, block_qubits, blocks)
    return StateVector(block_qubits * blocks, amps[0])


def encode(spec: EncodingSpec, x) -> StateVector:
    return StateVector(spec.n_qubits, encode_batch(spec, x)[0])
