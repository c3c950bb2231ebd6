"""Model assembly tests: wiring, counts, census, and the reduced-state oracle."""

import numpy as np
import pytest

from qcnnbench import ansatz as anz
from qcnnbench import model as mdl
from qcnnbench.encoding import EncodingSpec, default_spec, encode
from qcnnbench.simulator import PAULI_Z

from test_simulator import full_matrix_2q

TABLE_COUNTS = {
    "c1": 12, "c2": 12, "c3": 18, "c4": 24, "c5": 24,
    "c6": 24, "c7": 36, "c8": 36, "c9a": 51, "c9b": 45,
}
HQC_EFFECTIVE = {
    "c1": 14, "c2": 7, "c3": 28, "c4": 42, "c5": 42,
    "c6": 35, "c7": 56, "c8": 56, "c9": 84,
}


def qubit_spec(aid="c4", n=8, **kw):
    layers = n.bit_length() - 1
    kw.setdefault("filters_per_layer", (1,) * layers)
    return mdl.ModelSpec(default_spec("qubit", n), aid, n_qubits=n, **kw)


class TestWiring:
    def test_periodic_layer1_includes_wrap(self):
        plan = mdl.plan_wiring(qubit_spec())
        assert (7, 0) in plan.layers[0].conv_pairs

    def test_open_excludes_wrap(self):
        plan = mdl.plan_wiring(qubit_spec(boundary="open"))
        assert (7, 0) not in plan.layers[0].conv_pairs

    def test_survivors_and_readout(self):
        plan = mdl.plan_wiring(qubit_spec())
        assert plan.layers[0].survivors_after == (1, 3, 5, 7)
        assert plan.layers[1].survivors_after == (3, 7)
        assert plan.layers[2].survivors_after == (7,)
        assert plan.readout == 7

    def test_pool_discards_first_of_pair(self):
        plan = mdl.plan_wiring(qubit_spec())
        assert plan.layers[0].pool_pairs == ((0, 1), (2, 3), (4, 5), (6, 7))

    def test_open_9b_is_nearest_neighbour(self):
        assert mdl.audit_nearest_neighbour(qubit_spec("c9b", boundary="open"))

    def test_periodic_is_not_nearest_neighbour(self):
        assert not mdl.audit_nearest_neighbour(qubit_spec("c9b"))

    def test_hqc_uses_binary_tree(self):
        plan = mdl.plan_wiring(qubit_spec("c3", weight_sharing="independent"))
        assert plan.layers[0].conv_pairs == ((0, 1), (2, 3), (4, 5), (6, 7))
        assert len(mdl.placements(qubit_spec("c3", weight_sharing="independent"))) == 7

    def test_non_power_of_two_rejected(self):
        with pytest.raises(ValueError):
            mdl.ModelSpec(EncodingSpec("qubit", 6), "c1", (1, 1), n_qubits=6)


class TestCounts:
    @pytest.mark.parametrize("aid,total", sorted(TABLE_COUNTS.items()))
    def test_shared_totals_match_reference_table(self, aid, total):
        assert mdl.count_params(qubit_spec(aid)) == total

    def test_multi_filter_formula(self):
        spec = qubit_spec("c3", filters_per_layer=(2, 2, 2))
        assert mdl.count_params(spec) == 3 * (2 * 4 + 2)

    @pytest.mark.parametrize("aid,eff", sorted(HQC_EFFECTIVE.items()))
    def test_hqc_effective_census(self, aid, eff):
        spec = qubit_spec(aid, weight_sharing="independent")
        assert mdl.count_effective_params(spec) == eff
        assert mdl.count_params(spec) == 7 * anz.conv_param_count(aid)

    def test_filter_sweep_configs(self):
        # the filter sweep uses equal per-layer counts L in {1, 2, 3}
        for L in (1, 2, 3):
            spec = qubit_spec("c2", filters_per_layer=(L, L, L))
            assert mdl.count_params(spec) == 3 * (L * 2 + 2)

    def test_shared_filters_share_slots_within_layer(self):
        spec = qubit_spec("c4")
        by_layer = {}
        for p in mdl.placements(spec):
            if p.kind == "conv":
                by_layer.setdefault((p.layer, p.filter_index), set()).add(p.slots)
        for slots in by_layer.values():
            assert len(slots) == 1  # one slot tuple per (layer, filter)


class TestForward:
    def test_identity_circuit_on_zeros(self):
        spec = qubit_spec("c4")
        p0, p1, z = mdl.forward(spec, np.zeros(24), np.zeros(8))
        assert (p0, p1, z) == (1.0, 0.0, 1.0)

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(0)
        spec = qubit_spec("c7")
        params = rng.uniform(-np.pi, np.pi, mdl.count_params(spec))
        x = rng.uniform(0, np.pi * 0.999, 8)
        p0, p1, _ = mdl.forward(spec, params, x)
        assert abs(p0 + p1 - 1) < 1e-12

    def test_param_length_checked(self):
        with pytest.raises(ValueError):
            mdl.forward(qubit_spec("c1"), np.zeros(11), np.zeros(8))


def density_matrix_forward(spec, params, x):
    """Layer-by-layer reduced-density-matrix oracle.

    Applies each layer's blocks as full matrices on the current register
    and explicitly partial-traces the discarded qubits afterwards,
    mirroring the layer recursion rho_i = Tr_B[U rho U^+]; returns the
    readout statistics from the final one-qubit density matrix.
    """
    plan = mdl.plan_wiring(spec)
    rho = None
    state = encode(spec.encoding, x).amplitudes
    rho = np.outer(state, state.conj())
    qubits = list(range(spec.n_qubits))  # live qubit labels, in order
    for layer_index, layer in enumerate(plan.layers):
        n_live = len(qubits)
        for p in mdl.placements(spec):
            if p.layer != layer_index:
                continue
            mat = anz.bind_raw(p.template, np.asarray(params)[list(p.slots)])
            qa, qb = qubits.index(p.pair[0]), qubits.index(p.pair[1])
            full = full_matrix_2q(mat, qa, qb, n_live)
            rho = full @ rho @ full.conj().T
        # partial trace over the discarded (first-of-pair) qubits
        discard = [qubits.index(a) for a, _ in layer.pool_pairs]
        keep = [i for i in range(n_live) if i not in discard]
        t = rho.reshape((2,) * (2 * n_live))
        for d in sorted(discard, reverse=True):
            t = np.trace(t, axis1=d, axis2=d + t.ndim // 2)
        rho = t.reshape(2 ** len(keep), 2 ** len(keep))
        qubits = [qubits[i] for i in keep]
    assert qubits == [plan.readout]
    p0 = rho[0, 0].real
    p1 = rho[1, 1].real
    return p0, p1, np.trace(rho @ PAULI_Z).real


class TestReducedStateEquivalence:
    @pytest.mark.parametrize("aid", ["c2", "c4", "c9a", "c9b"])
    def test_forward_matches_density_matrix_oracle(self, aid):
        rng = np.random.default_rng(1)
        spec = qubit_spec(aid, n=4)
        for _ in range(12):
            params = rng.uniform(-np.pi, np.pi, mdl.count_params(spec))
            x = rng.uniform(0, np.pi * 0.999, 4)
            got = mdl.forward(spec, params, x)
            want = density_matrix_forward(spec, params, x)
            assert np.max(np.abs(np.array(got) - np.array(want))) < 1e-10

    def test_no_signaling_from_discarded_qubits(self):
        from qcnnbench.simulator import (
            GateMatrix,
            _apply_2q_kernel,
            _readout_kernel,
        )
        from test_simulator import random_unitary

        rng = np.random.default_rng(5)
        spec = qubit_spec("c4")
        params = rng.uniform(-np.pi, np.pi, mdl.count_params(spec))
        x = rng.uniform(0, np.pi * 0.999, (1, 8))
        from qcnnbench.encoding import encode_batch

        amps = encode_batch(spec.encoding, x)
        for p in mdl.placements(spec):
            mat = anz.bind_raw(p.template, params[list(p.slots)])
            amps = _apply_2q_kernel(amps, mat, p.pair[0], p.pair[1], 8)
        base = _readout_kernel(amps, 7, 8)
        # extra unitaries on already-discarded qubits (0..6 except 7)
        extra = amps
        u = random_unitary(4, rng)
        extra = _apply_2q_kernel(extra, u, 0, 4, 8)
        extra = _apply_2q_kernel(extra, u, 2, 6, 8)
        after = _readout_kernel(extra, 7, 8)
        assert np.max(np.abs(np.array(base) - np.array(after))) < 1e-12


class TestHashesAndSerialization:
    def test_roundtrip(self):
        spec = qubit_spec("c9b", boundary="open")
        again = mdl.ModelSpec.from_dict(spec.to_dict())
        assert mdl.model_hash(again) == mdl.model_hash(spec)

    def test_hash_distinguishes_specs(self):
        a = mdl.model_hash(qubit_spec("c4"))
        b = mdl.model_hash(qubit_spec("c4", boundary="open"))
        assert a != b

    def test_hqc_requires_no_pool_and_single_filter(self):
        with pytest.raises(ValueError):
            mdl.ModelSpec(
                default_spec("qubit"), "c4", weight_sharing="independent",
                pooling_gates=True,
            )
        with pytest.raises(ValueError):
            mdl.ModelSpec(
                default_spec("qubit"), "c4", filters_per_layer=(2, 1, 1),
                weight_sharing="independent",
            )
