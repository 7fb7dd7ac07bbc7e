"""
Tests for the concatenated Steane code.
"""

import numpy as np
import pytest

from app.exceptions import CapacityError, CodeError, DimensionError
from app.models.quantum import Basis
from app.services.css_code import CssCode, get_code
from app.services.rng_service import rng_service
from app.services.statevector import qsim


@pytest.mark.unit
class TestCodeParameters:
    """Test code sizes and construction."""

    def test_level_one(self, code):
        """Test [[7, 1, 3]]."""
        assert (code.m, code.d, code.d_c) == (7, 3, 1)

    def test_level_two(self):
        """Test [[49, 1, 9]]."""
        code = get_code(2)
        assert (code.m, code.d, code.d_c) == (49, 9, 4)

    def test_level_zero_rejected(self):
        """Test level 0 is not a code."""
        with pytest.raises(CodeError):
            CssCode(0)

    def test_cached_instances_compare_equal(self):
        """Test codes compare by level."""
        assert get_code(1) == CssCode(1)
        assert get_code(1) != get_code(2)


@pytest.mark.unit
class TestClassicalDecoding:
    """Test nearest-codeword decoding of measured blocks."""

    def test_codewords_decode_to_their_logical(self, code, rng):
        """Test sampled codewords of both logical values."""
        for logical in (0, 1):
            word = code.sample_codeword(logical, rng)
            assert code.is_codeword(word)
            assert code.classical_decode(word) == logical

    def test_single_flip_corrected(self, code):
        """Test every single bit flip of every codeword."""
        rng = rng_service.stream(3)
        for logical in (0, 1):
            word = code.sample_codeword(logical, rng)
            for q in range(code.m):
                flipped = word.copy()
                flipped[q] ^= 1
                assert code.classical_decode(flipped) == logical
                assert code.distance_to_code(flipped) == 1

    def test_level_two_corrects_four_flips(self):
        """Test d_c = 4 flips at level 2."""
        code = get_code(2)
        rng = rng_service.stream(11)
        for trial in range(20):
            logical = trial & 1
            word = code.sample_codeword(logical, rng)
            for position in rng.choice(code.m, 4):
                word[int(position)] ^= 1
            assert code.classical_decode(word) == logical

    def test_wrong_length(self, code):
        """Test decoding a block of the wrong size."""
        with pytest.raises(DimensionError):
            code.classical_decode([0] * 6)


@pytest.mark.unit
class TestQuantumCode:
    """Test encode and syndrome decoding on states."""

    def test_roundtrip(self, code, rng):
        """Test decode(encode(psi)) = psi."""
        state = qsim.random_state(1, rng)
        decoded, report = code.decode(code.encode(state), rng)
        assert report.correctable
        assert qsim.fidelity(decoded, state) == pytest.approx(1.0, abs=1e-9)

    def test_every_single_qubit_error_corrected(self, code, rng):
        """Test X, Z and Y on each of the 7 qubits."""
        state = qsim.random_state(1, rng)
        encoded = code.encode(state)
        for q in range(code.m):
            for x, z in ((1, 0), (0, 1), (1, 1)):
                decoded, report = code.decode(qsim.apply_pauli(encoded, q, x, z), rng)
                assert report.correctable
                assert qsim.fidelity(decoded, state) >= 1 - 1e-9

    def test_logical_x_is_transversal(self, code):
        """Test X on all qubits flips the logical value."""
        encoded = code.encode(qsim.new_register(1))
        flipped = qsim.apply_pauli_string(encoded, np.ones(code.m, dtype=int), np.zeros(code.m, dtype=int))
        decoded, _ = code.decode(flipped, rng_service.stream(5))
        assert qsim.basis_bits(decoded) == [1]

    def test_level_two_not_simulated(self):
        """Test the quantum encoder is level-1 only."""
        with pytest.raises(CapacityError):
            get_code(2).encode(qsim.new_register(1))

    def test_cnot_is_transversal(self, code, rng):
        """Test seven physical CNOTs between two blocks act as a logical CNOT."""
        for _ in range(3):
            psi, phi = qsim.random_state(1, rng), qsim.random_state(1, rng)
            s = qsim.tensor(code.encode(psi), code.encode(phi))
            for q in range(code.m):
                s = qsim.apply_cnot(s, q, code.m + q)
            s, second = code.decode_at(s, code.m, rng)
            s, first = code.decode_at(s, 0, rng)
            assert first.correctable and second.correctable
            expected = qsim.apply_cnot(qsim.tensor(psi, phi), 0, 1)
            assert qsim.fidelity(s, expected) == pytest.approx(1.0, abs=1e-9)


def logical_one_probability(code, encoded) -> float:
    """Probability that measuring every physical qubit in Z decodes to 1."""
    probs = encoded.probabilities()
    total = 0.0
    for index, p in enumerate(probs):
        if p > 0:
            bits = [(index >> (code.m - 1 - q)) & 1 for q in range(code.m)]
            total += p * code.classical_decode(bits)
    return total


@pytest.mark.unit
class TestMeasuredBlocks:
    """Test physical measurement followed by classical decoding."""

    @pytest.mark.parametrize("basis", [Basis.Z, Basis.X])
    def test_measure_then_decode_matches_logical_measurement(self, code, basis):
        """Test exact outcome probabilities on 50 random states."""
        rng = rng_service.stream(31)
        for _ in range(50):
            state = qsim.random_state(1, rng)
            encoded = code.encode(state)
            if basis is Basis.X:
                state = qsim.apply_gate(state, "H", 0)
                for q in range(code.m):
                    encoded = qsim.apply_gate(encoded, "H", q)
            assert logical_one_probability(code, encoded) == pytest.approx(state.probabilities()[1], abs=1e-9)

    def test_encoded_one_measures_to_one(self, code):
        """Test 100 seeded Z measurements of every qubit of an encoded |1>."""
        encoded = code.encode(qsim.new_register(1, "1"))
        for seed in range(100):
            rng = rng_service.stream(seed)
            s, bits = encoded, []
            for q in range(code.m):
                outcome, s = qsim.measure(s, q, Basis.Z, rng)
                bits.append(outcome.bit)
            assert code.is_codeword(bits)
            assert code.classical_decode(bits) == 1
