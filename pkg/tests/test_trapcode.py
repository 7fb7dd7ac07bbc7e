"""
Tests for the trap-code scheme.
"""

import numpy as np
import pytest

from app.exceptions import CircuitError, ConfigError, SlotError
from app.models.circuit import CircuitDesc
from app.models.quantum import Basis
from app.services.block_register import permute_bits
from app.services.circuit_service import circuit_service
from app.services.experiment_service import experiment_service
from app.services.rng_service import rng_service
from app.services.statevector import qsim
from app.services.trapcode_service import code_for_size, trapcode_service


@pytest.mark.unit
class TestTrapKeys:
    """Test key generation and encryption bookkeeping."""

    def test_keygen_shapes(self, trapcode_key):
        """Test one permutation of 21 positions and a pad pair per slot."""
        assert sorted(int(p) for p in trapcode_key.pi) == list(range(21))
        assert trapcode_key.n == 2
        assert all(len(v) == 21 for v in trapcode_key.x + trapcode_key.z)

    def test_code_for_size(self):
        """Test block sizes map back to their code."""
        assert code_for_size(21).level == 1
        assert code_for_size(147).level == 2

    def test_slot_reuse_rejected(self, trapcode_key, rng):
        """Test encrypting twice into one slot."""
        ct = trapcode_service.enc(trapcode_key, qsim.new_register(1), 0)
        with pytest.raises(SlotError):
            trapcode_service.enc(trapcode_key, qsim.new_register(1), 0, ct)

    def test_slot_outside_key(self, trapcode_key):
        """Test a slot the key has no pads for."""
        with pytest.raises(SlotError):
            trapcode_service.enc(trapcode_key, qsim.new_register(1), 5)

    @pytest.mark.slow
    def test_zero_traps_uniform(self, code):
        """Test every physical position is a |0> trap in a third of 10^4 keys."""
        rng = rng_service.stream(404)
        layout = np.zeros(3 * code.m, dtype=np.uint8)
        layout[code.m : 2 * code.m] = 1
        counts = np.zeros(3 * code.m)
        for _ in range(10000):
            counts += permute_bits(layout, trapcode_service.keygen(1, code, rng).pi)
        assert np.all(np.abs(counts / 10000 - 1 / 3) <= 0.02)


@pytest.mark.unit
class TestTrapCodeEvaluation:
    """Test honest evaluation and verified decryption."""

    def test_honest_identity(self, code, rng):
        """Test VerDec of an unevaluated ciphertext."""
        key = trapcode_service.keygen(1, code, rng)
        state = qsim.random_state(1, rng)
        result = trapcode_service.verdec(key, trapcode_service.encrypt(key, state), CircuitDesc(n_wires=1), rng)
        assert result.accepted
        assert qsim.fidelity(result.state, state) == pytest.approx(1.0, abs=1e-9)

    def test_pauli_cnot_circuit(self, trapcode_key, rng):
        """Test X, CNOT and Z against the plaintext channel."""
        circuit = CircuitDesc.from_text("X 0; CNOT 0 1; Z 1")
        state = qsim.random_state(2, rng)
        ct = trapcode_service.eval_circuit(trapcode_service.encrypt(trapcode_key, state), circuit, rng)
        result = trapcode_service.verdec(trapcode_key, ct, circuit, rng)
        expected = circuit_service.simulate(circuit, state)
        assert result.accepted
        assert qsim.fidelity(result.state, expected.state) == pytest.approx(1.0, abs=1e-9)

    def test_measurement_outcome(self, code, rng):
        """Test a Z measurement of |1> decodes to 1."""
        key = trapcode_service.keygen(1, code, rng)
        circuit = CircuitDesc.from_text("MEAS 0 Z")
        ct = trapcode_service.eval_circuit(trapcode_service.encrypt(key, qsim.new_register(1, "1")), circuit, rng)
        result = trapcode_service.verdec(key, ct, circuit, rng)
        assert result.accepted
        assert result.bits == {0: 1}

    def test_classically_controlled_pauli(self, trapcode_key, rng):
        """Test X on wire 1 controlled by the outcome of wire 0."""
        circuit = CircuitDesc.from_text("MEAS 0 Z; X 1 if 0")
        ct = trapcode_service.encrypt(trapcode_key, qsim.new_register(2, "10"))
        ct = trapcode_service.eval_circuit(ct, circuit, rng)
        result = trapcode_service.verdec(trapcode_key, ct, circuit, rng)
        assert result.accepted
        assert result.bits == {0: 1}
        assert qsim.basis_bits(result.state) == [1]

    def test_unsupported_gate(self, trapcode_key, rng):
        """Test the trap code refuses H."""
        ct = trapcode_service.encrypt(trapcode_key, qsim.new_register(2))
        with pytest.raises(CircuitError):
            trapcode_service.eval_circuit(ct, CircuitDesc.from_text("H 0", 2), rng)

    def test_full_x_attack_rejected(self, code, rng):
        """Test X on every position hits the |0> traps."""
        key = trapcode_service.keygen(1, code, rng)
        ct = trapcode_service.encrypt(key, qsim.random_state(1, rng))
        trapcode_service.apply_attack(ct, 0, x_bits=np.ones(key.size, dtype=np.uint8))
        result = trapcode_service.verdec(key, ct, CircuitDesc(n_wires=1), rng)
        assert not result.accepted
        assert qsim.basis_bits(result.state) == [0]

    def test_wrong_basis_claim_rejected(self, code, rng):
        """Test a Z measurement claimed as an X measurement."""
        key = trapcode_service.keygen(1, code, rng)
        ct = trapcode_service.encrypt(key, qsim.new_register(1))
        ct = trapcode_service.eval_circuit(ct, CircuitDesc.from_text("MEAS 0 Z"), rng)
        result = trapcode_service.verdec(key, ct, CircuitDesc.from_text("MEAS 0 X"), rng)
        assert not result.accepted
        assert result.bits == {0: 0}

    def test_missing_measurement_rejected(self, code, rng):
        """Test a claimed measurement that never happened."""
        key = trapcode_service.keygen(1, code, rng)
        ct = trapcode_service.encrypt(key, qsim.new_register(1))
        result = trapcode_service.verdec(key, ct, CircuitDesc.from_text("MEAS 0 Z"), rng)
        assert not result.accepted

    def test_key_update_stream(self, trapcode_key):
        """Test X then X leaves the key unchanged."""
        rules = trapcode_service.rules_for(CircuitDesc.from_text("X 0; X 0", 2))
        assert trapcode_service.key_update(rules, trapcode_key) == trapcode_key

    @pytest.mark.slow
    def test_physical_block_roundtrip(self, code, rng):
        """Test VerDec on the explicit 21-qubit block."""
        key = trapcode_service.keygen(1, code, rng)
        state = qsim.random_state(1, rng)
        ct = trapcode_service.encrypt(key, state)
        logical, accepted, report = trapcode_service.verdec_physical(key, 0, trapcode_service.materialize(ct, 0), rng)
        assert accepted and report.correctable
        assert qsim.fidelity(logical, state) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.unit
class TestDetectionOracle:
    """Test the exact detection probabilities."""

    def test_weight_one(self):
        """Test a single X is caught with probability 1/3."""
        assert 1 - trapcode_service.detection_oracle(7, 1) == pytest.approx(1 / 3, abs=1e-12)

    def test_weight_three(self):
        """Test C(14,3)/C(21,3) = 364/1330."""
        assert trapcode_service.detection_oracle(7, 3) == pytest.approx(364 / 1330, abs=1e-12)

    def test_oracle_within_bound(self):
        """Test the exact rate never exceeds (2/3)^ceil(w/2)."""
        for w in range(1, 8):
            assert trapcode_service.detection_oracle(7, w) <= trapcode_service.acceptance_bound(w) + 1e-12

    def test_attack_weight_out_of_range(self):
        """Test weights outside 1..3m."""
        with pytest.raises(ConfigError):
            experiment_service.run_attack_stats(weight=22, trials=1)

    def test_attack_stats_small_run(self):
        """Test 2000 weight-1 attacks land near 1/3 rejection."""
        report = experiment_service.run_attack_stats(weight=1, basis=Basis.X, trials=2000, seed=7)
        assert abs(report.summary["reject_rate"] - 1 / 3) < 0.05
        assert len(report.frame) == 2000

    @pytest.mark.slow
    @pytest.mark.parametrize("basis", ["X", "Z"])
    def test_attack_stats_weight_one(self, basis):
        """Test 10^4 weight-1 attacks against the 1/3 oracle."""
        report = experiment_service.run_attack_stats(weight=1, basis=basis, trials=10000, seed=2024)
        assert abs(report.summary["reject_rate"] - 1 / 3) <= 0.02
        assert report.passed

    @pytest.mark.slow
    @pytest.mark.parametrize("weight", [2, 3])
    def test_attack_stats_higher_weight(self, weight):
        """Test weight-2 and weight-3 attacks against the hypergeometric oracle."""
        report = experiment_service.run_attack_stats(weight=weight, basis="X", trials=10000, seed=99)
        assert abs(report.summary["accept_rate"] - report.summary["oracle_accept"]) <= 0.02
        assert report.summary["accept_ci_low"] <= report.summary["bound"]


@pytest.mark.unit
class TestMeasuredRecords:
    """Test interpretation of measured blocks."""

    def test_honest_record(self, code, rng):
        """Test a Z-measured |1> decodes to 1 with clean traps."""
        key = trapcode_service.keygen(1, code, rng)
        ct = trapcode_service.encrypt(key, qsim.new_register(1, "1"))
        ct = trapcode_service.eval_measure(ct, 0, Basis.Z, rng)
        record = ct.records()[0]
        check = trapcode_service.verdec_measurement(key, 0, record.bits, Basis.Z)
        assert check.accepted
        assert check.bit == 1

    def test_flipped_record_rejected(self, code, rng):
        """Test a record with every bit flipped trips the |0> traps."""
        key = trapcode_service.keygen(1, code, rng)
        ct = trapcode_service.eval_measure(trapcode_service.encrypt(key, qsim.new_register(1)), 0, Basis.Z, rng)
        flipped = ct.records()[0].bits ^ 1
        check = trapcode_service.verdec_measurement(key, 0, flipped, Basis.Z)
        assert not check.accepted
        assert "zero-trap" in check.reason
