"""State-vector simulator tests: known circuits, kernel oracles, invariants."""

import numpy as np
import pytest

from qcnnbench import simulator as sim


def random_state(n, rng):
    amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return sim.StateVector(n, amps / np.linalg.norm(amps))


def random_unitary(dim, rng):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(m)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def full_matrix_2q(u, qa, qb, n):
    """Kron-expanded 2^n x 2^n matrix for a 4x4 gate on (qa, qb)."""
    dim = 2**n
    full = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            ia, ib = (i >> (n - 1 - qa)) & 1, (i >> (n - 1 - qb)) & 1
            ja, jb = (j >> (n - 1 - qa)) & 1, (j >> (n - 1 - qb)) & 1
            mask = (1 << (n - 1 - qa)) | (1 << (n - 1 - qb))
            if (i & ~mask) == (j & ~mask):
                full[i, j] = u[2 * ia + ib, 2 * ja + jb]
    return full


def reduced_density_matrix(state, keep):
    """Partial-trace oracle: density matrix of the kept qubits."""
    n = state.n_qubits
    psi = state.amplitudes.reshape((2,) * n)
    keep = list(keep)
    drop = [q for q in range(n) if q not in keep]
    psi = np.transpose(psi, keep + drop)
    psi = psi.reshape(2 ** len(keep), 2 ** len(drop))
    return psi @ psi.conj().T


class TestInitZero:
    def test_single_qubit(self):
        s = sim.init_zero(1)
        assert np.allclose(s.amplitudes, [1, 0])

    def test_three_qubits(self):
        s = sim.init_zero(3)
        assert s.amplitudes.shape == (8,)
        assert s.amplitudes[0] == 1
        assert np.all(s.amplitudes[1:] == 0)

    def test_eight_qubits_norm(self):
        s = sim.init_zero(8)
        assert len(s.amplitudes) == 256
        assert abs(s.norm_sq() - 1) < 1e-12

    @pytest.mark.parametrize("n", [0, 25, -3])
    def test_out_of_range(self, n):
        with pytest.raises(ValueError):
            sim.init_zero(n)


class TestApply1q:
    def test_ry_pi_flips(self):
        s = sim.apply_1q(sim.init_zero(1), sim.GateMatrix(1, sim.ry(np.pi)), 0)
        assert np.allclose(s.amplitudes, [0, 1])

    def test_rz_phase_only(self):
        theta = 0.83
        s = sim.apply_1q(sim.init_zero(1), sim.GateMatrix(1, sim.rz(theta)), 0)
        assert np.allclose(s.amplitudes, [np.exp(-1j * theta / 2), 0])
        p0, p1, z = sim.readout(s, 0)
        assert abs(z - 1) < 1e-12

    def test_hadamard_balances_z(self):
        s = sim.apply_1q(sim.init_zero(1), sim.GateMatrix(1, sim.HADAMARD), 0)
        _, _, z = sim.readout(s, 0)
        assert abs(z) < 1e-12

    def test_target_out_of_range(self):
        with pytest.raises(ValueError):
            sim.apply_1q(sim.init_zero(2), sim.GateMatrix(1, sim.HADAMARD), 2)

    def test_non_unitary_rejected(self):
        with pytest.raises(sim.ContractViolation):
            sim.GateMatrix(1, np.array([[1, 0], [0, 2]], dtype=complex))

    def test_msb_convention(self):
        # flipping qubit 0 of three lands on index 4 = |100>
        s = sim.apply_1q(sim.init_zero(3), sim.GateMatrix(1, sim.PAULI_X), 0)
        assert np.allclose(s.amplitudes[4], 1)


class TestApply2q:
    def test_cnot_truth_table(self):
        s = sim.init_zero(2)
        s = sim.apply_1q(s, sim.GateMatrix(1, sim.PAULI_X), 0)  # |10>
        s = sim.apply_2q(s, sim.GateMatrix(2, sim.CNOT), 0, 1)
        assert np.allclose(np.abs(s.amplitudes), [0, 0, 0, 1])  # |11>

    def test_swap_permutes_amplitudes(self):
        rng = np.random.default_rng(7)
        s = random_state(2, rng)
        swapped = sim.apply_2q(s, sim.GateMatrix(2, sim.SWAP), 0, 1)
        want = s.amplitudes[[0, 2, 1, 3]]
        assert np.allclose(swapped.amplitudes, want)

    def test_equal_indices_rejected(self):
        with pytest.raises(ValueError):
            sim.apply_2q(sim.init_zero(2), sim.GateMatrix(2, sim.CNOT), 1, 1)

    def test_matches_kron_expanded_oracle_8q(self):
        rng = np.random.default_rng(11)
        s = random_state(8, rng)
        u = random_unitary(4, rng)
        for qa, qb in [(0, 1), (2, 6), (6, 2), (7, 0), (3, 4)]:
            got = sim.apply_2q(s, sim.GateMatrix(2, u), qa, qb)
            want = full_matrix_2q(u, qa, qb, 8) @ s.amplitudes
            assert np.max(np.abs(got.amplitudes - want)) < 1e-10

    def test_reversed_roles_match_swapped_gate(self):
        rng = np.random.default_rng(3)
        s = random_state(3, rng)
        u = random_unitary(4, rng)
        swapped = sim.SWAP @ u @ sim.SWAP
        a = sim.apply_2q(s, sim.GateMatrix(2, u), 2, 0)
        b = sim.apply_2q(s, sim.GateMatrix(2, swapped), 0, 2)
        assert np.allclose(a.amplitudes, b.amplitudes)


class TestReadout:
    def test_zero_state(self):
        assert sim.readout(sim.init_zero(3), 1) == (1.0, 0.0, 1.0)

    def test_qubit_encoded_expectation(self):
        # <Z> of cos(x/2)|0> + sin(x/2)|1> is cos(x)
        rng = np.random.default_rng(5)
        for x in rng.uniform(0, np.pi, 10):
            s = sim.apply_1q(sim.init_zero(1), sim.GateMatrix(1, sim.ry(x)), 0)
            _, _, z = sim.readout(s, 0)
            assert abs(z - np.cos(x)) < 1e-12

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(9)
        s = random_state(5, rng)
        for q in range(5):
            p0, p1, z = sim.readout(s, q)
            assert abs(p0 + p1 - 1) < 1e-12
            assert abs(z - (p0 - p1)) < 1e-12

    def test_matches_partial_trace_oracle(self):
        rng = np.random.default_rng(13)
        s = random_state(4, rng)
        for q in range(4):
            rho = reduced_density_matrix(s, [q])
            p0, p1, z = sim.readout(s, q)
            assert abs(p0 - rho[0, 0].real) < 1e-12
            assert abs(z - np.trace(rho @ sim.PAULI_Z).real) < 1e-12


class TestInvariants:
    def test_norm_preserved_over_random_circuit(self):
        rng = np.random.default_rng(21)
        s = random_state(6, rng)
        for _ in range(40):
            u = random_unitary(4, rng)
            qa, qb = rng.choice(6, size=2, replace=False)
            s = sim.apply_2q(s, sim.GateMatrix(2, u), int(qa), int(qb))
        assert abs(s.norm_sq() - 1) < 1e-12

    def test_kernel_linearity_on_unnormalized_input(self):
        rng = np.random.default_rng(23)
        psi = rng.normal(size=16) + 1j * rng.normal(size=16)
        phi = rng.normal(size=16) + 1j * rng.normal(size=16)
        a, b = 1.7 - 0.3j, -0.8 + 2.1j
        u = random_unitary(4, rng)
        lhs = sim._apply_2q_kernel(a * psi + b * phi, u, 1, 3, 4)
        rhs = a * sim._apply_2q_kernel(psi, u, 1, 3, 4) + b * sim._apply_2q_kernel(
            phi, u, 1, 3, 4
        )
        assert np.allclose(lhs, rhs)

    def test_disjoint_gates_commute(self):
        rng = np.random.default_rng(29)
        s = random_state(6, rng)
        u1, u2 = sim.GateMatrix(2, random_unitary(4, rng)), sim.GateMatrix(
            2, random_unitary(4, rng)
        )
        ab = sim.apply_2q(sim.apply_2q(s, u1, 0, 2), u2, 3, 5)
        ba = sim.apply_2q(sim.apply_2q(s, u2, 3, 5), u1, 0, 2)
        assert np.max(np.abs(ab.amplitudes - ba.amplitudes)) < 1e-12

    def test_marginal_readout_ignores_untouched_qubits(self):
        # discarded qubits never need explicit tracing: acting on them
        # does not change the survivor's statistics
        rng = np.random.default_rng(31)
        s = random_state(4, rng)
        u = random_unitary(2, rng)
        before = sim.readout(s, 3)
        after = sim.readout(sim.apply_1q(s, sim.GateMatrix(1, u), 1), 3)
        assert np.allclose(before, after, atol=1e-12)


class TestControlledConstructor:
    def test_filled_control(self):
        c = sim.controlled(sim.PAULI_X, 1)
        assert np.allclose(c, sim.CNOT)

    def test_open_control_acts_on_zero(self):
        c = sim.controlled(sim.PAULI_X, 0)
        s = sim.apply_2q(sim.init_zero(2), sim.GateMatrix(2, c), 0, 1)
        assert np.allclose(np.abs(s.amplitudes), [0, 1, 0, 0])  # |01>

    def test_pauli_string_exp_is_unitary_and_commuting_product(self):
        rng = np.random.default_rng(37)
        a, b, c = rng.uniform(-2, 2, 3)
        n = sim.pauli_string_exp(a, b, c)
        assert sim.is_unitary(n, 1e-12)
        # matches the dense matrix exponential computed by diagonalization
        h = a * sim._XX + b * sim._YY + c * sim._ZZ
        w, v = np.linalg.eigh(h)
        want = v @ np.diag(np.exp(1j * w)) @ v.conj().T
        assert np.max(np.abs(n - want)) < 1e-12
