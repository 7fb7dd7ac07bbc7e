"""
Tests for the state-vector simulator.
"""

import numpy as np
import pytest

from app.exceptions import CapacityError, DimensionError, ProjectionError, QubitIndexError
from app.models.quantum import Basis
from app.services.rng_service import rng_service
from app.services.statevector import OperationCounter, qsim
from app.services.workspace import QubitWorkspace


@pytest.mark.unit
class TestStateVector:
    """Test register construction and single gates."""

    def test_new_register_product_state(self):
        """Test |+0> amplitudes."""
        s = qsim.new_register(2, "+0")
        half = 1 / np.sqrt(2)
        assert np.allclose(s.amplitudes, [half, 0, half, 0])

    def test_new_register_rejects_bad_init(self):
        """Test init strings of the wrong length or alphabet."""
        with pytest.raises(DimensionError):
            qsim.new_register(2, "0")
        with pytest.raises(DimensionError):
            qsim.new_register(1, "a")

    def test_capacity_error_above_cap(self):
        """Test the 24 qubit cap."""
        with pytest.raises(CapacityError):
            qsim.new_register(25)

    def test_gates_and_cnot(self):
        """Test X then CNOT maps |00> to |11>."""
        s = qsim.apply_gate(qsim.new_register(2), "X", 0)
        s = qsim.apply_cnot(s, 0, 1)
        assert qsim.basis_bits(s) == [1, 1]

    def test_cnot_needs_distinct_qubits(self):
        """Test CNOT with control equal to target."""
        with pytest.raises(QubitIndexError):
            qsim.apply_cnot(qsim.new_register(2), 1, 1)

    def test_qubit_out_of_range(self):
        """Test gate on a missing qubit."""
        with pytest.raises(QubitIndexError):
            qsim.apply_gate(qsim.new_register(1), "H", 3)

    def test_pauli_string_matches_single_paulis(self, rng):
        """Test one Pauli string equals the per-qubit Paulis."""
        s = qsim.random_state(3, rng)
        x, z = [1, 0, 1], [1, 1, 0]
        one_by_one = s
        for q in range(3):
            one_by_one = qsim.apply_pauli(one_by_one, q, x[q], z[q])
        assert qsim.fidelity(qsim.apply_pauli_string(s, x, z), one_by_one) == pytest.approx(1.0, abs=1e-12)

    def test_states_are_immutable_values(self):
        """Test operations return new states."""
        s = qsim.new_register(1)
        t = qsim.apply_gate(s, "X", 0)
        assert qsim.basis_bits(s) == [0]
        assert qsim.basis_bits(t) == [1]

    def test_operation_counter(self):
        """Test gate and measurement counting."""
        with OperationCounter() as ops:
            s = qsim.apply_gate(qsim.new_register(1), "H", 0)
            qsim.measure(s, 0, Basis.X, rng_service.stream(1))
        assert ops.total == 2

    def test_dump_state(self):
        """Test one "index re im" line per amplitude."""
        assert qsim.dump_state(qsim.new_register(1, "1")) == "0 0 0\n1 1 0\n"


@pytest.mark.unit
class TestMeasurement:
    """Test measurement, projection and discarding."""

    def test_x_measurement_of_plus(self):
        """Test |+> measured in X always gives 0."""
        plus = qsim.new_register(1, "+")
        for seed in range(10):
            outcome, _ = qsim.measure(plus, 0, Basis.X, rng_service.stream(seed))
            assert outcome.bit == 0

    def test_z_measurement_collapses(self, rng):
        """Test the post-measurement state is the outcome."""
        outcome, post = qsim.measure(qsim.new_register(1, "+"), 0, Basis.Z, rng)
        assert qsim.basis_bits(post) == [outcome.bit]

    def test_project_zero_probability(self):
        """Test forcing an impossible outcome."""
        with pytest.raises(ProjectionError):
            qsim.project(qsim.new_register(1), 0, 1)

    def test_project_probability(self):
        """Test Born probability of a forced outcome."""
        prob, post = qsim.project(qsim.new_register(1, "+"), 0, 1)
        assert prob == pytest.approx(0.5)
        assert qsim.basis_bits(post) == [1]

    def test_discard_superposed_qubit(self):
        """Test discarding a qubit that is not classical."""
        with pytest.raises(ProjectionError):
            qsim.discard_qubit(qsim.new_register(2, "+0"), 0)

    def test_teleportation(self, rng):
        """Test Bell measurement plus X^a Z^b correction teleports a state."""
        state = qsim.random_state(1, rng)
        _, receiver, s = qsim.make_epr(state)
        (a, b), s = qsim.bell_measure(s, 0, 1, rng)
        s = qsim.apply_pauli(s, receiver, a, b)
        s = qsim.discard_qubit(s, 1)
        s = qsim.discard_qubit(s, 0)
        assert qsim.fidelity(s, state) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.unit
class TestTwirl:
    """Test the Pauli twirl average."""

    def test_twirl_is_maximally_mixed(self):
        """Test the average over all Pauli keys is I/4 for random 2-qubit states."""
        for seed in range(10):
            s = qsim.random_state(2, rng_service.stream(seed))
            average = qsim.pauli_twirl_average(s)
            assert np.max(np.abs(average - np.eye(4) / 4)) <= 1e-9

    def test_permute_qubits(self):
        """Test relabelling |10> to |01>."""
        s = qsim.permute_qubits(qsim.new_register(2, "10"), [1, 0])
        assert qsim.basis_bits(s) == [0, 1]

    def test_permute_rejects_non_permutation(self):
        """Test invalid permutations."""
        with pytest.raises(DimensionError):
            qsim.permute_qubits(qsim.new_register(2), [0, 0])


@pytest.mark.unit
class TestWorkspace:
    """Test the factorized qubit workspace."""

    def test_factors_join_on_cnot(self):
        """Test independent qubits share a factor only after interacting."""
        ws = QubitWorkspace()
        a, b = ws.add(qsim.new_register(2, "+0"))
        assert len(ws) == 2
        ws.apply_cnot(a, b)
        bell = ws.extract([a, b])
        half = 1 / np.sqrt(2)
        assert np.allclose(np.abs(bell.amplitudes), [half, 0, 0, half])

    def test_measure_and_project(self, rng):
        """Test measurement outcomes of a basis state."""
        ws = QubitWorkspace()
        (h,) = ws.add(qsim.new_register(1, "1"))
        assert ws.measure(h, Basis.Z, rng) == 1
