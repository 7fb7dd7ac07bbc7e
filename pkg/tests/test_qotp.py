"""
Tests for one-time programs built on the verifiable scheme.
"""

import pytest

from app.exceptions import CircuitError, TokenReuseError
from app.models.circuit import CircuitDesc
from app.services.qotp_service import OneTimeToken, and_circuit, qotp_service, write_input
from app.services.rng_service import rng_service


@pytest.mark.unit
class TestOneTimeToken:
    """Test the single-query token."""

    def test_second_query_refused(self):
        """Test the token answers exactly once."""
        token = OneTimeToken(lambda x: x + 1)
        assert token.query(1) == 2
        assert token.consumed
        with pytest.raises(TokenReuseError):
            token.query(1)

    def test_write_input(self):
        """Test receiver bits become leading X gates."""
        circuit = write_input(CircuitDesc.from_text("wires 2\nMEAS 1 Z"), (0, 1), (1, 0))
        assert [g.kind.value for g in circuit.gates] == ["X", "MEAS"]
        with pytest.raises(CircuitError):
            write_input(circuit, (0,), (2,))

    def test_and_circuit_shape(self):
        """Test the AND body measures wire 2 and uses seven T gates."""
        circuit = and_circuit()
        assert circuit.n_wires == 3
        assert circuit.classical_outputs == (2,)
        assert circuit.t_count == 7

    def test_quantum_outputs_refused(self, rng):
        """Test programs must measure every output."""
        with pytest.raises(CircuitError):
            qotp_service.create(CircuitDesc.from_text("X 0; X 1"), (1,), 1, rng)


@pytest.mark.unit
class TestOneTimeProgram:
    """Test creation and execution of the AND program."""

    def test_and_of_ones(self):
        """Test 1 AND 1."""
        output = qotp_service.qotp_demo((1,), (1,), seed=3)
        assert output.accepted, output.reason
        assert output.bits[2] == 1

    def test_token_spent_after_execution(self):
        """Test the receiver cannot query a second time."""
        rng = rng_service.stream(9)
        program = qotp_service.create(and_circuit(), (1,), 1, rng)
        output = qotp_service.execute(program, (0,), rng)
        assert output.accepted and output.bits[2] == 0
        with pytest.raises(TokenReuseError):
            program.token.query((1,), None, "", rng)

    @pytest.mark.slow
    @pytest.mark.parametrize("sender,receiver", [(0, 0), (0, 1), (1, 0), (1, 1)])
    def test_and_truth_table(self, sender, receiver):
        """Test every input pair."""
        output = qotp_service.qotp_demo((sender,), (receiver,), seed=11)
        assert output.accepted, output.reason
        assert output.bits[2] == sender & receiver
