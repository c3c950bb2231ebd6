"""Model assembly: encoding stage + alternating convolution/pooling layers.

Wiring conventions (qubits are 0-indexed internally; n must be a power
of two):

* A layer acts on the current survivor list.  With shared weights the
  convolution pattern per filter is: adjacent survivor pairs
  (s0,s1),(s2,s3),... then staggered pairs (s1,s2),(s3,s4),... and,
  under periodic boundary with more than two survivors, the wrap pair
  (s_last, s0).  Every filter repetition replays the pattern with fresh
  parameter slots.
* Pooling pairs adjacent survivors (s0,s1),(s2,s3),... and discards the
  first (control) qubit of each pair; with ``pooling_gates`` the
  two-parameter pool block is applied first.  Discarded qubits are never
  touched again, which realizes the layer-wise partial trace for any
  observable on the survivors.
* Independent weights ("hqc") use the plain binary-tree wiring: adjacent
  pairs only, no staggered or wrap blocks, no pooling gates, and every
  block gets its own parameter slots.

Parameter slots are assigned layer-major, convolution before pooling,
filter index ascending.  The readout qubit is the last survivor.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import ansatz as anz
from .encoding import EncodingSpec, encode_batch
from .simulator import _apply_2q_kernel, _readout_kernel

SHARING_MODES = ("shared", "independent")
BOUNDARIES = ("periodic", "open")

_TOUCH_BOTH = ("cx", "cz", "crx", "crz", "nxyz")


@dataclass(frozen=True)
class ModelSpec:
    encoding: EncodingSpec
    ansatz: str
    filters_per_layer: tuple = (1, 1, 1)
    boundary: str = "periodic"
    weight_sharing: str = "shared"
    n_qubits: int = 8
    pooling_gates: bool | None = None  # None: derived from the ansatz id

    def __post_init__(self):
        if self.ansatz.lower() not in anz.ANSATZ_IDS + ("c9",):
            raise ValueError(f"unknown ansatz id {self.ansatz!r}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}")
        if self.weight_sharing not in SHARING_MODES:
            raise ValueError(f"weight_sharing must be one of {SHARING_MODES}")
        n = self.n_qubits
        if n < 2 or n & (n - 1):
            raise ValueError("n_qubits must be a power of two >= 2")
        if self.encoding.n_qubits != n:
            raise ValueError("encoding qubit count must match the model")
        layers = n.bit_length() - 1
        if len(self.filters_per_layer) != layers:
            raise ValueError(
                f"{n} qubits need {layers} filter counts, "
                f"got {self.filters_per_layer}"
            )
        if any(f < 1 for f in self.filters_per_layer):
            raise ValueError("filter counts must be positive")
        if self.weight_sharing == "independent":
            if self.pool_enabled:
                raise ValueError("independent weights (hqc) exclude pooling gates")
            if any(f != 1 for f in self.filters_per_layer):
                raise ValueError("independent weights use one filter per layer")

    @property
    def pool_enabled(self) -> bool:
        if self.pooling_gates is not None:
            return self.pooling_gates
        if self.weight_sharing == "independent":
            return False
        return anz.has_pool_gates(self.ansatz)

    @property
    def n_layers(self) -> int:
        return self.n_qubits.bit_length() - 1

    def to_dict(self) -> dict:
        enc = self.encoding
        return {
            "encoding": {
                "kind": enc.kind,
                "n_qubits": enc.n_qubits,
                "block_qubits": enc.block_qubits,
                "blocks": enc.blocks,
            },
            "ansatz": self.ansatz,
            "filters_per_layer": list(self.filters_per_layer),
            "boundary": self.boundary,
            "weight_sharing": self.weight_sharing,
            "n_qubits": self.n_qubits,
            "pooling_gates": self.pool_enabled,
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelSpec":
        enc = d["encoding"]
        return ModelSpec(
            encoding=EncodingSpec(
                enc["kind"], enc["n_qubits"], enc["block_qubits"], enc["blocks"]
            ),
            ansatz=d["ansatz"],
            filters_per_layer=tuple(d["filters_per_layer"]),
            boundary=d["boundary"],
            weight_sharing=d["weight_sharing"],
            n_qubits=d["n_qubits"],
            pooling_gates=d.get("pooling_gates"),
        )


def model_hash(spec: ModelSpec) -> str:
    blob = json.dumps(spec.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass(frozen=True)
class LayerPlan:
    conv_pairs: tuple  # one filter repetition's ordered pairs
    pool_pairs: tuple  # (discard, survive) pairs
    survivors_after: tuple


@dataclass(frozen=True)
class WiringPlan:
    layers: tuple
    readout: int


def plan_wiring(spec: ModelSpec) -> WiringPlan:
    survivors = list(range(spec.n_qubits))
    layers = []
    while len(survivors) > 1:
        adjacent = [
            (survivors[i], survivors[i + 1]) for i in range(0, len(survivors) - 1, 2)
        ]
        if spec.weight_sharing == "independent":
            conv = list(adjacent)
        else:
            staggered = [
                (survivors[i], survivors[i + 1])
                for i in range(1, len(survivors) - 1, 2)
            ]
            conv = adjacent + staggered
            if spec.boundary == "periodic" and len(survivors) > 2:
                conv.append((survivors[-1], survivors[0]))
        pool = list(adjacent)
        survivors = [b for _, b in pool]
        layers.append(
            LayerPlan(tuple(conv), tuple(pool), tuple(survivors))
        )
    return WiringPlan(tuple(layers), survivors[0])


@dataclass(frozen=True)
class Placement:
    """One bound block application inside the unrolled circuit."""

    layer: int
    kind: str  # conv | pool
    filter_index: int
    pair: tuple
    slots: tuple
    template: anz.CircuitTemplate = field(repr=False)


def placements(spec: ModelSpec) -> tuple:
    """Unrolled block applications in execution order, with slot ids."""
    conv_t = anz.build_conv(spec.ansatz)
    pool_t = anz.build_pool()
    plan = plan_wiring(spec)
    out = []
    next_slot = 0

    def fresh(n):
        nonlocal next_slot
        slots = tuple(range(next_slot, next_slot + n))
        next_slot += n
        return slots

    for li, layer in enumerate(plan.layers):
        if spec.weight_sharing == "shared":
            for f in range(spec.filters_per_layer[li]):
                slots = fresh(conv_t.param_count)
                for pair in layer.conv_pairs:
                    out.append(Placement(li, "conv", f, pair, slots, conv_t))
            if spec.pool_enabled:
                slots = fresh(pool_t.param_count)
                for pair in layer.pool_pairs:
                    out.append(Placement(li, "pool", 0, pair, slots, pool_t))
        else:
            for pair in layer.conv_pairs:
                out.append(
                    Placement(li, "conv", 0, pair, fresh(conv_t.param_count), conv_t)
                )
    return tuple(out)


def count_params(spec: ModelSpec) -> int:
    places = placements(spec)
    if not places:
        return 0
    return max(max(p.slots) for p in places if p.slots) + 1


def slot_shift_rules(spec: ModelSpec) -> tuple:
    """Gradient shift rule per global parameter slot."""
    rules = [None] * count_params(spec)
    for p in placements(spec):
        local = p.template.slot_rules()
        for i, s in enumerate(p.slots):
            rules[s] = local[i]
    return tuple(rules)


# ---------------------------------------------------------------------------
# Forward evaluation
# ---------------------------------------------------------------------------


def forward_batch(spec: ModelSpec, params, features):
    """Evaluate the circuit on a (batch, features) array.

    Returns (p0, p1, z) arrays for the readout qubit.
    """
    params = np.asarray(params, dtype=float)
    total = count_params(spec)
    if params.shape != (total,):
        raise ValueError(f"expected {total} parameters, got {params.shape}")
    plan = plan_wiring(spec)
    amps = encode_batch(spec.encoding, features)
    n = spec.n_qubits
    for p in placements(spec):
        mat = anz.bind_raw(p.template, params[list(p.slots)])
        amps = _apply_2q_kernel(amps, mat, p.pair[0], p.pair[1], n)
    p0, p1 = _readout_kernel(amps, plan.readout, n)
    return p0, p1, p0 - p1


def forward(spec: ModelSpec, params, x):
    """Single-sample readout (p0, p1, z_expectation)."""
    p0, p1, z = forward_batch(spec, params, np.asarray(x, dtype=float)[None, :])
    return float(p0[0]), float(p1[0]), float(z[0])


# ---------------------------------------------------------------------------
# Structural analyses
# ---------------------------------------------------------------------------


def effective_slots(spec: ModelSpec) -> tuple:
    """Parameter slots that can influence the readout qubit.

    Walks the unrolled gate list backwards from the readout and grows the
    influence cone: a gate is influential iff it touches a live qubit,
    and an influential two-qubit gate makes both its qubits live.  Slots
    never attached to an influential gate have identically zero gradient
    because every gate carrying them is a unitary acting strictly after
    the last contact with the readout cone on a discarded qubit.
    """
    plan = plan_wiring(spec)
    live = {plan.readout}
    effective = set()
    unrolled = []
    for p in placements(spec):
        for op in p.template.gate_ops:
            if op.kind in _TOUCH_BOTH:
                touched = (p.pair[0], p.pair[1])
            else:
                touched = (p.pair[op.qubits[0]],)
            unrolled.append((touched, tuple(p.slots[s] for s in op.slots)))
    for touched, slots in reversed(unrolled):
        if any(q in live for q in touched):
            effective.update(slots)
            live.update(touched)
    return tuple(sorted(effective))


def count_effective_params(spec: ModelSpec) -> int:
    return len(effective_slots(spec))


def audit_nearest_neighbour(spec: ModelSpec) -> bool:
    """True iff every block acts on consecutive survivors with no wrap.

    Consecutive-survivor pairs can be laid out on a one-dimensional chain
    of physical qubits, so this is the wiring-level statement of the
    nearest-neighbour-only property.
    """
    plan = plan_wiring(spec)
    survivors = tuple(range(spec.n_qubits))
    for layer in plan.layers:
        allowed = {
            (survivors[i], survivors[i + 1]) for i in range(len(survivors) - 1)
        }
        for pair in layer.conv_pairs + layer.pool_pairs:
            if pair not in allowed:
                return False
        survivors = layer.survivors_after
    return True
