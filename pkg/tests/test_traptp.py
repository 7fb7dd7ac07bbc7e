"""
Tests for the verifiable scheme: keys, honest evaluation, verification
variants, correctness and compactness.
"""

import pytest

from app.exceptions import BudgetError, CircuitError
from app.models.circuit import CircuitDesc
from app.models.log import ComputationLog, LogEntry, LogEntryKind
from app.models.traptp import SchemeParams, SchemeVariant, SideChannel, pad_label, record_outputs
from app.services.circuit_service import circuit_service
from app.services.experiment_service import experiment_service
from app.services.he_service import homomorphic_service
from app.services.macro_expansion import h_blocks, p_block, socket_block, t_block
from app.services.rng_service import rng_service
from app.services.statevector import qsim
from app.services.traptp_service import traptp_service


def run_honest(sk, evk, circuit, state, rng, variant=SchemeVariant.TRAPTP, side=None):
    ct = traptp_service.enc(sk, state, rng, side)
    out, log = traptp_service.eval_circuit(evk, ct, circuit, rng)
    return traptp_service.verdec(sk, out, log, circuit, rng, variant, side)


def signed_entry(record) -> LogEntry:
    return LogEntry(
        kind=LogEntryKind.ENC,
        function_id=record.label,
        payload={"message": record.message.hex(), "tag": record.tag.hex()},
        outputs=tuple(record_outputs(record.label, record.message)),
    )


def final_keys_entry(pads: LogEntry, block: str) -> LogEntry:
    return LogEntry(
        kind=LogEntryKind.FINAL_KEYS,
        function_id="final-keys",
        inputs=(pads.ref(0), pads.ref(1)),
        payload={"wires": [block]},
    )


@pytest.mark.unit
class TestKeyGeneration:
    """Test the evaluation key layout."""

    def test_resource_blocks(self, traptp_keys):
        """Test one P, one H pair, one T state and the gadget sockets."""
        _, evk = traptp_keys
        for name in (p_block(1), *h_blocks(1), t_block(1), socket_block(1, 0), socket_block(1, 5)):
            assert name in evk.blocks
        assert set(evk.gadgets) == {1}

    def test_p_resource_decrypts_to_p_plus(self, traptp_keys, rng):
        """Test the magic P state under sk."""
        sk, evk = traptp_keys
        state = traptp_service.decrypt_resource(sk, evk, [p_block(1)], rng)
        expected = qsim.apply_gate(qsim.new_register(1, "+"), "P", 0)
        assert qsim.fidelity(state, expected) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.unit
class TestHonestEvaluation:
    """Test honest runs are accepted with the right output."""

    def test_unevaluated_ciphertext(self, traptp_keys, rng):
        """Test VerDec of a fresh ciphertext."""
        sk, evk = traptp_keys
        state = qsim.random_state(1, rng)
        result = run_honest(sk, evk, CircuitDesc(n_wires=1), state, rng)
        assert result.accepted
        assert qsim.fidelity(result.state, state) == pytest.approx(1.0, abs=1e-9)

    def test_h_then_t(self, traptp_keys, rng):
        """Test a circuit using the H resource and the T gadget."""
        sk, evk = traptp_keys
        circuit = CircuitDesc.from_text("H 0; T 0")
        state = qsim.random_state(1, rng)
        result = run_honest(sk, evk, circuit, state, rng)
        assert result.accepted, result.reason
        expected = circuit_service.simulate(circuit, state)
        assert qsim.fidelity(result.state, expected.state) == pytest.approx(1.0, abs=1e-9)

    def test_measurement_outcome(self, traptp_keys, rng):
        """Test H then an X measurement of |0> reports 0."""
        sk, evk = traptp_keys
        result = run_honest(sk, evk, CircuitDesc.from_text("H 0; MEAS 0 X"), qsim.new_register(1), rng)
        assert result.accepted, result.reason
        assert result.bits == {0: 0}

    def test_combined_ciphertexts(self, small_budgets, rng):
        """Test two encryptions under one key evaluated together."""
        sk, evk = traptp_service.keygen(small_budgets, rng)
        first, second = qsim.random_state(1, rng), qsim.random_state(1, rng)
        ct = traptp_service.combine(traptp_service.enc(sk, first, rng), traptp_service.enc(sk, second, rng, offset=1))
        circuit = CircuitDesc.from_text("CNOT 0 1; P 1")
        out, log = traptp_service.eval_circuit(evk, ct, circuit, rng)
        result = traptp_service.verdec(sk, out, log, circuit, rng)
        expected = circuit_service.simulate(circuit, qsim.tensor(first, second))
        assert result.accepted, result.reason
        assert qsim.fidelity(result.state, expected.state) == pytest.approx(1.0, abs=1e-9)

    def test_wire_count_mismatch(self, traptp_keys, rng):
        """Test a circuit wider than the ciphertext."""
        sk, evk = traptp_keys
        ct = traptp_service.enc(sk, qsim.new_register(1), rng)
        with pytest.raises(CircuitError):
            traptp_service.eval_circuit(evk, ct, CircuitDesc.from_text("CNOT 0 1"), rng)

    def test_budget_exceeded(self, traptp_keys, rng):
        """Test two T gates against a key with one gadget."""
        sk, evk = traptp_keys
        ct = traptp_service.enc(sk, qsim.new_register(1), rng)
        with pytest.raises(BudgetError):
            traptp_service.eval_circuit(evk, ct, CircuitDesc.from_text("T 0; T 0"), rng)


@pytest.mark.unit
class TestVerification:
    """Test rejection and the hybrid variants."""

    def test_wrong_circuit_rejected(self, traptp_keys, rng):
        """Test a log for X checked against Z."""
        sk, evk = traptp_keys
        ct = traptp_service.enc(sk, qsim.new_register(1), rng)
        out, log = traptp_service.eval_circuit(evk, ct, CircuitDesc.from_text("X 0"), rng)
        result = traptp_service.verdec(sk, out, log, CircuitDesc.from_text("Z 0"), rng)
        assert not result.accepted

    def test_log_skipping_a_gate_rejected(self, rng):
        """Test a log that drops the key update of X and names the fresh pads as final keys."""
        sk, evk = traptp_service.keygen(SchemeParams(level=1, t=0, p=0, h=0), rng)
        circuit = CircuitDesc.from_text("X 0")
        ct = traptp_service.enc(sk, qsim.new_register(1), rng)
        record = ct.pads[pad_label("0")]
        out, _ = traptp_service.eval_circuit(evk, ct, circuit, rng)
        forged = ComputationLog()
        forged.append(LogEntry(kind=LogEntryKind.GATE_CLAIM, function_id="X 0"))
        pads = forged.append(signed_entry(record))
        forged.append(final_keys_entry(pads, "0"))
        out.final_pads[0] = pads.outputs
        result = traptp_service.verdec(sk, out, forged, circuit, rng)
        assert not result.accepted
        assert "final keys" in result.reason

    def test_x_gate_without_resources(self, rng):
        """Test the honest counterpart: X on |0> with empty budgets decrypts to |1>."""
        sk, evk = traptp_service.keygen(SchemeParams(level=1, t=0, p=0, h=0), rng)
        result = run_honest(sk, evk, CircuitDesc.from_text("X 0"), qsim.new_register(1), rng)
        assert result.accepted, result.reason
        assert qsim.fidelity(result.state, qsim.new_register(1, "1")) == pytest.approx(1.0, abs=1e-9)

    def test_measurement_checked_against_other_pads_rejected(self, traptp_keys, rng):
        """Test a trap check of wire 0's record fed with the pads of wire 1."""
        sk, evk = traptp_keys
        circuit = CircuitDesc.from_text("wires 2; MEAS 0 Z")
        ct = traptp_service.enc(sk, qsim.new_register(2), rng)
        other = ct.pads[pad_label("1")]
        out, log = traptp_service.eval_circuit(evk, ct, circuit, rng)
        forged = ComputationLog()
        for entry in log:
            if entry.kind is LogEntryKind.EVAL:
                break
            forged.append(entry)
        (keys,) = [e for e in forged if e.function_id == "keys"]
        (measured,) = [e for e in forged if e.kind is LogEntryKind.MEASUREMENT]
        pads = forged.append(signed_entry(other))
        refs = [keys.ref(0), pads.ref(0), pads.ref(1), measured.ref(0), measured.ref(1)]
        inputs = [*keys.outputs, *pads.outputs, *measured.outputs]
        _, check = homomorphic_service.eval(sk.he_keys.pk(0), "tc-verdec-measurement:1", inputs, rng, refs=refs)
        forged.append(check)
        forged.append(final_keys_entry(pads, "1"))
        result = traptp_service.verdec(sk, out, forged, circuit, rng)
        assert not result.accepted
        assert "does not need" in result.reason

    @pytest.mark.slow
    def test_single_x_on_output_caught_by_zero_traps(self):
        """Test 10^4 runs of X 0 with one physical X on the output: a third are rejected."""
        rng = rng_service.stream(606)
        params = SchemeParams(level=1, t=0, p=0, h=0)
        circuit = CircuitDesc.from_text("X 0")
        rejected = 0
        for _ in range(10000):
            sk, evk = traptp_service.keygen(params, rng)
            ct = traptp_service.enc(sk, qsim.new_register(1), rng)
            out, log = traptp_service.eval_circuit(evk, ct, circuit, rng)
            x_bits = [0] * 21
            x_bits[int(rng.integers(0, 21))] = 1
            out.register.apply_physical_pauli(out.block_id(0), x_bits)
            rejected += not traptp_service.verdec(sk, out, log, circuit, rng).accepted
        assert abs(rejected / 10000 - 1 / 3) <= 0.02

    @pytest.mark.parametrize("variant", [SchemeVariant.PRIME, SchemeVariant.DOUBLE_PRIME])
    def test_hybrid_variants_accept_honest_runs(self, variant, small_budgets, rng):
        """Test the side-channel variants on an honest T circuit."""
        side = SideChannel()
        sk, evk = traptp_service.keygen(small_budgets, rng, side)
        circuit = CircuitDesc.from_text("T 0")
        state = qsim.random_state(1, rng)
        result = run_honest(sk, evk, circuit, state, rng, variant, side)
        assert result.accepted, result.reason
        assert qsim.fidelity(result.state, qsim.apply_gate(state, "T", 0)) == pytest.approx(1.0, abs=1e-9)

    def test_hybrid_variant_without_side_channel(self, traptp_keys, rng):
        """Test the prime variant refuses to run blind."""
        sk, evk = traptp_keys
        result = run_honest(sk, evk, CircuitDesc.from_text("X 0"), qsim.new_register(1), rng, SchemeVariant.PRIME)
        assert not result.accepted


@pytest.mark.unit
class TestAcceptance:
    """Test correctness and compactness experiments."""

    def test_correctness_small_batch(self):
        """Test a handful of random circuits."""
        report = experiment_service.run_correctness(count=10, seed=3)
        assert report.passed
        assert report.summary["accepted"] == 10

    @pytest.mark.slow
    def test_correctness_200_circuits(self):
        """Test 200 random circuits all accepted with fidelity 1."""
        report = experiment_service.run_correctness(count=200, seed=0)
        assert report.passed
        assert report.summary["min_fidelity"] >= 1 - 1e-9

    def test_compactness(self):
        """Test Dec cost is flat while Ver cost grows with the circuit."""
        m = experiment_service.compactness(seed=5)
        assert m["short_accepted"] == m["long_accepted"] == 1
        assert m["short_dec_operations"] == m["long_dec_operations"]
        assert m["long_ver_steps"] > m["short_ver_steps"]

    def test_params_validation(self):
        """Test levels outside 1..2."""
        with pytest.raises(ValueError):
            SchemeParams(level=3)
