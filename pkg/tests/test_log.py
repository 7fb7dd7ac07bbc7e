"""
Tests for the computation log format and the claim expansion it is checked against.
"""

import pytest

from app.exceptions import BudgetError, LogFormatError
from app.models.circuit import CircuitDesc
from app.models.log import LOG_HEADER, ComputationLog, LogEntry, LogEntryKind, parse_ref
from app.models.quantum import Basis
from app.services.dataflow import DataflowTracer, TermTable
from app.services.he_service import homomorphic_service
from app.services.macro_expansion import expand_circuit, h_blocks, socket_block, t_block


def sample_log() -> ComputationLog:
    log = ComputationLog()
    log.append(LogEntry(kind=LogEntryKind.GATE_CLAIM, function_id="X 0"))
    log.append(LogEntry(kind=LogEntryKind.EVAL, function_id="xor", inputs=("0.0",), payload={"epoch": 0, "nonces": [7]}))
    return log


@pytest.mark.unit
class TestLogFormat:
    """Test writing and strict parsing."""

    def test_sequence_numbers_and_digests(self):
        """Test append assigns seq and digest."""
        log = sample_log()
        assert [e.seq for e in log] == [0, 1]
        assert all(len(e.digest) == 16 for e in log)

    def test_text_roundtrip(self):
        """Test from_text(to_text()) keeps every line."""
        text = sample_log().to_text()
        assert text.startswith(LOG_HEADER + "\n")
        assert ComputationLog.from_text(text).to_text() == text

    def test_every_byte_flip_is_rejected_or_changes_an_entry(self):
        """Test single-character edits never parse back to the same log."""
        text = sample_log().to_text()
        original = [e.to_line() for e in ComputationLog.from_text(text)]
        for position in range(len(text)):
            edited = text[:position] + chr(ord(text[position]) ^ 1) + text[position + 1 :]
            try:
                parsed = ComputationLog.from_text(edited)
            except LogFormatError:
                continue
            assert [e.to_line() for e in parsed] != original

    def test_missing_header(self):
        """Test a log without its header line."""
        text = sample_log().to_text()
        with pytest.raises(LogFormatError):
            ComputationLog.from_text(text[len(LOG_HEADER) + 1 :])

    def test_non_ascii_rejected(self):
        """Test a non-ascii byte anywhere."""
        text = sample_log().to_text()
        with pytest.raises(LogFormatError):
            ComputationLog.from_text(text.replace("xor", "xör"))

    def test_forward_reference_rejected(self):
        """Test an input naming a later entry."""
        log = ComputationLog()
        log.append(LogEntry(kind=LogEntryKind.EVAL, function_id="xor", inputs=("3.0",), payload={}))
        with pytest.raises(LogFormatError):
            ComputationLog.from_text(log.to_text())

    def test_digest_covers_payload(self):
        """Test the digest changes with the payload."""
        entry = sample_log()[1]
        changed = entry.model_copy(update={"payload": {"epoch": 0, "nonces": [8]}})
        assert changed.compute_digest() != entry.digest

    def test_parse_ref(self):
        """Test output references."""
        assert parse_ref("12.3") == (12, 3)
        with pytest.raises(LogFormatError):
            parse_ref("12")

    def test_claims(self):
        """Test claim listing."""
        assert sample_log().claims() == ["X 0"]


@pytest.mark.unit
class TestClaimExpansion:
    """Test gate claims derived from circuits."""

    def test_pauli_and_cnot_claims(self):
        """Test one claim per Clifford-free gate."""
        exp = expand_circuit(CircuitDesc.from_text("X 0; CNOT 0 1; MEAS 1 Z"))
        assert len(exp.texts) == 3
        assert exp.texts[0].startswith("X")
        assert 1 in exp.measured

    def test_budget_exceeded(self):
        """Test a circuit needing more T states than supplied."""
        with pytest.raises(BudgetError):
            expand_circuit(CircuitDesc.from_text("T 0; T 0"), (1, 0, 0))

    def test_t_gate_opens_an_epoch(self):
        """Test a T expansion contains its recrypt claim."""
        exp = expand_circuit(CircuitDesc.from_text("T 0"), (1, 0, 0))
        assert "RECRYPT 1" in exp.texts
        assert exp.t_count == 1

    def test_recrypt_claim_names_the_measured_block(self):
        """Test the RECRYPT claim carries the block whose outcome drives the conditional P."""
        exp = expand_circuit(CircuitDesc.from_text("H 0; T 0"), (1, 0, 1))
        (recrypt,) = [c for c in exp.claims if c.op == "RECRYPT"]
        assert recrypt.condition == h_blocks(1)[1]
        assert recrypt.text == "RECRYPT 1"


def trace(text: str, route: int = 0):
    terms = TermTable()
    protocol = homomorphic_service.backend.garden_hose_protocol
    tracer = DataflowTracer(terms, 1, protocol, lambda _term: route)
    return terms, tracer.trace(expand_circuit(CircuitDesc.from_text(text)))


@pytest.mark.unit
class TestDataflow:
    """Test the key-update dataflow a circuit requires."""

    def test_x_updates_the_x_pad_only(self):
        """Test X runs unpermute, bit-flip-mask and permute on the x pad under pi."""
        terms, flow = trace("X 0")
        pi = terms.record("keys", 0)
        x, z = terms.record("pad:0", 0), terms.record("pad:0", 1)
        layout = terms.output("unpermute", (x, pi), 0)
        flipped = terms.output("bit-flip-mask:7", (layout,), 0)
        assert flow.pads["0"] == (terms.output("permute", (flipped, pi), 0), z)
        assert flow.computed == {layout, flipped, flow.pads["0"][0]}

    def test_measurement_flag_binds_the_block_pads(self):
        """Test the trap flag of a measurement is computed from that block's own pads and record."""
        terms, flow = trace("X 1; MEAS 0 Z")
        inputs = (
            terms.record("keys", 0),
            terms.record("pad:0", 0),
            terms.record("pad:0", 1),
            terms.measured("0", Basis.Z, 0),
            terms.measured("0", Basis.Z, 1),
        )
        assert flow.flags["0"] == terms.output("tc-verdec-measurement:1", inputs, 1)
        assert flow.outcomes["0"] == terms.output("tc-verdec-measurement:1", inputs, 0)
        assert "0" not in flow.pads

    def test_basis_is_part_of_the_record(self):
        """Test a Z and an X measurement of one block need different checks."""
        terms = TermTable()
        assert terms.measured("0", Basis.Z, 0) != terms.measured("0", Basis.X, 0)

    @pytest.mark.parametrize("route", [0, 1])
    def test_conditional_p_measures_its_route(self, route):
        """Test the gadget sockets measured by a T gate follow the route of the condition bit."""
        spec = homomorphic_service.backend.garden_hose_protocol()
        _, flow = trace("T 0", route)
        hops = {socket_block(1, s) for pair in spec.routes[route] for s in pair}
        assert set(flow.flags) == {"0", t_block(1), socket_block(1, spec.in_socket), *hops}
        assert set(flow.pads) == {socket_block(1, spec.out_socket)}
