"""Template tests: parameter counts, unitarity, SO(4) block, pool semantics."""

import numpy as np
import pytest

from qcnnbench import ansatz as anz
from qcnnbench import simulator as sim

ALL_CONV = ["c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8", "c9"]

EXPECTED_COUNTS = {
    "c1": 2, "c2": 2, "c3": 4, "c4": 6, "c5": 6,
    "c6": 6, "c7": 10, "c8": 10, "c9": 15,
}

# numerical-fit KAK angles reproducing CNOT (validated by the assertion)
CNOT_PARAMS = [
    1.5707963031421561, -3.1415926916037447, -2.7829869841515977,
    -2.4824900146503097, 1.570796413154548, 1.5707963407139351,
    0.785398165840423, 1.5707963244767091, -2.752276476751931e-08,
    1.5707962946057852, 4.353783352066769, -3.1415926382456085,
    0.911693742255697, -1.5707963178158455, 1.5707963306107122,
]


@pytest.mark.parametrize("aid", ALL_CONV)
def test_param_counts(aid):
    t = anz.build_conv(aid)
    assert t.param_count == EXPECTED_COUNTS[aid]
    slots = {s for op in t.gate_ops for s in op.slots}
    assert slots == set(range(t.param_count))


def test_aliases_and_unknown_id():
    assert anz.build_conv("c9a").name == "c9"
    assert anz.build_conv("c9b").name == "c9"
    with pytest.raises(ValueError):
        anz.build_conv("c10")
    assert anz.has_pool_gates("c9a") and not anz.has_pool_gates("c9b")


@pytest.mark.parametrize("aid", ALL_CONV)
def test_bound_matrices_unitary_100_draws(aid):
    t = anz.build_conv(aid)
    rng = np.random.default_rng(42)
    for _ in range(100):
        u = anz.bind_raw(t, rng.uniform(-2 * np.pi, 2 * np.pi, t.param_count))
        assert np.max(np.abs(u.conj().T @ u - np.eye(4))) < 1e-10


def test_bind_length_mismatch():
    with pytest.raises(ValueError):
        anz.bind(anz.build_conv("c3"), [0.1, 0.2])


def test_c1_zero_bind_is_cnot():
    u = anz.bind_raw(anz.build_conv("c1"), np.zeros(2))
    assert np.allclose(u, sim.CNOT)


def test_c2_zero_bind_is_entangler_only():
    # zero rotations leave the fixed H-pair + CZ core
    u = anz.bind_raw(anz.build_conv("c2"), np.zeros(2))
    want = sim.CZ @ np.kron(sim.HADAMARD, sim.HADAMARD)
    assert np.allclose(u, want)


@pytest.mark.parametrize("aid", ["c4", "c5", "c6", "c9"])
def test_zero_bind_is_identity(aid):
    t = anz.build_conv(aid)
    u = anz.bind_raw(t, np.zeros(t.param_count))
    assert np.max(np.abs(u - np.eye(4))) < 1e-12


def test_c6_is_special_orthogonal():
    t = anz.build_conv("c6")
    rng = np.random.default_rng(7)
    for _ in range(100):
        u = anz.bind_raw(t, rng.uniform(-2 * np.pi, 2 * np.pi, 6))
        assert np.max(np.abs(u.imag)) < 1e-10
        r = u.real
        assert np.max(np.abs(r.T @ r - np.eye(4))) < 1e-10
        assert abs(np.linalg.det(r) - 1) < 1e-10


def test_c9_reaches_cnot():
    u = anz.bind_raw(anz.build_conv("c9"), np.asarray(CNOT_PARAMS))
    phase = np.trace(u.conj().T @ sim.CNOT) / 4
    phase /= abs(phase)
    assert np.max(np.abs(u * phase - sim.CNOT)) < 1e-6


def test_shift_rules_per_slot():
    t = anz.build_conv("c9")
    rules = t.slot_rules()
    assert rules[:6] == (anz.SHIFT_ROT,) * 6
    assert rules[6:9] == (anz.SHIFT_PEXP,) * 3
    assert anz.build_conv("c4").slot_rules()[2] == anz.SHIFT_CTRL
    assert anz.build_pool().slot_rules() == (anz.SHIFT_CTRL, anz.SHIFT_CTRL)


class TestPool:
    def test_zero_angles_identity(self):
        u = anz.bind_raw(anz.build_pool(), np.zeros(2))
        assert np.allclose(u, np.eye(4))

    def test_open_control_flips_target(self):
        # control |0>, second angle pi: the open-controlled Rx fires
        u = anz.bind_raw(anz.build_pool(), [0.0, np.pi])
        s = sim.apply_2q(sim.init_zero(2), sim.GateMatrix(2, u), 0, 1)
        probs = np.abs(s.amplitudes) ** 2
        assert abs(probs[1] - 1) < 1e-12  # |01>

    def test_filled_control_inactive_on_zero(self):
        u = anz.bind_raw(anz.build_pool(), [2.1, 0.0])
        s = sim.apply_2q(sim.init_zero(2), sim.GateMatrix(2, u), 0, 1)
        _, _, z = sim.readout(s, 1)
        assert abs(z - 1) < 1e-12

    def test_survivor_marginal_matches_partial_trace_oracle(self):
        from test_simulator import random_state, reduced_density_matrix

        rng = np.random.default_rng(17)
        pool = anz.build_pool()
        for _ in range(20):
            s = random_state(4, rng)
            u = anz.bind_raw(pool, rng.uniform(-np.pi, np.pi, 2))
            out = sim.apply_2q(s, sim.GateMatrix(2, u), 1, 2)
            rho = reduced_density_matrix(out, [2])
            p0, p1, z = sim.readout(out, 2)
            assert abs(p0 - rho[0, 0].real) < 1e-10
            assert abs(z - np.trace(rho @ sim.PAULI_Z).real) < 1e-10
