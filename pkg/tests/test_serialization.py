"""
Tests for the record codecs and the frame parser.
"""

import numpy as np
import pytest

from app.exceptions import ProtocolError
from app.models.circuit import CircuitDesc
from app.models.traptp import SchemeParams
from app.services.rng_service import rng_service
from app.services.serialization_service import RECORD_MAGIC, serialization_service
from app.services.statevector import qsim
from app.services.traptp_service import traptp_service
from app.transport.protocol import HEADER, Frame, FrameKind, FrameParser, parse_header, parse_verdict, verdict_payload


@pytest.mark.unit
class TestRecords:
    """Test evaluation keys, ciphertexts, states, circuits and logs."""

    def test_eval_key_and_ciphertext_are_byte_stable(self, rng):
        """Test decode then encode reproduces the exact bytes."""
        sk, evk = traptp_service.keygen(SchemeParams(t=1, p=1, h=1), rng)
        ct = traptp_service.enc(sk, qsim.random_state(2, rng), rng)
        ct_bytes = serialization_service.encode_ciphertext(ct)
        evk_bytes = serialization_service.encode_eval_key(evk)
        assert serialization_service.encode_ciphertext(serialization_service.decode_ciphertext(ct_bytes)) == ct_bytes
        assert serialization_service.encode_eval_key(serialization_service.decode_eval_key(evk_bytes)) == evk_bytes

    def test_decoded_ciphertext_still_decrypts(self, rng):
        """Test a ciphertext sent through the codec verifies and decrypts."""
        sk, evk = traptp_service.keygen(SchemeParams(), rng)
        state = qsim.random_state(1, rng)
        encoded = serialization_service.encode_ciphertext(traptp_service.enc(sk, state, rng))
        ct = serialization_service.decode_ciphertext(encoded)
        evk = serialization_service.decode_eval_key(serialization_service.encode_eval_key(evk))
        circuit = CircuitDesc.from_text("X 0")
        out, log = traptp_service.eval_circuit(evk, ct, circuit, rng)
        result = traptp_service.verdec(sk, out, log, circuit, rng)
        assert result.accepted, result.reason
        assert qsim.fidelity(result.state, qsim.apply_gate(state, "X", 0)) == pytest.approx(1.0, abs=1e-9)

    def test_state_roundtrip(self, rng):
        """Test amplitude tables."""
        state = qsim.random_state(3, rng)
        decoded = serialization_service.decode_state(serialization_service.encode_state(state))
        assert np.array_equal(decoded.amplitudes, state.amplitudes)

    def test_unnormalized_state_rejected(self):
        """Test an amplitude table that is not a state."""
        data = bytearray(serialization_service.encode_state(qsim.new_register(1)))
        data[-16:] = np.array([1.0], dtype="<c16").tobytes()
        with pytest.raises(ProtocolError):
            serialization_service.decode_state(bytes(data))

    def test_circuit_and_log(self):
        """Test circuit and log records."""
        circuit = CircuitDesc.from_text("H 0; T 0; MEAS 0 X")
        assert serialization_service.decode_circuit(serialization_service.encode_circuit(circuit)) == circuit
        assert serialization_service.decode_log_text(serialization_service.encode_log_text("TRAPTP-LOG v1\n")) == (
            "TRAPTP-LOG v1\n"
        )

    def test_bad_magic(self):
        """Test a record with the wrong magic bytes."""
        data = serialization_service.encode_circuit(CircuitDesc.from_text("X 0"))
        assert data.startswith(RECORD_MAGIC)
        with pytest.raises(ProtocolError):
            serialization_service.decode_circuit(b"XXXX" + data[4:])

    def test_wrong_record_kind(self):
        """Test a log record handed to the circuit decoder."""
        with pytest.raises(ProtocolError):
            serialization_service.decode_circuit(serialization_service.encode_log_text("TRAPTP-LOG v1\n"))

    def test_truncated_and_trailing_bytes(self):
        """Test short records and records with garbage appended."""
        data = serialization_service.encode_state(qsim.new_register(2))
        with pytest.raises(ProtocolError):
            serialization_service.decode_state(data[:-1])
        with pytest.raises(ProtocolError):
            serialization_service.decode_state(data + b"\x00")


@pytest.mark.unit
class TestFrames:
    """Test framing and the incremental parser."""

    def test_split_delivery(self):
        """Test frames arriving one byte at a time."""
        stream = Frame(FrameKind.HELLO, b"TTP1").encode() + Frame(FrameKind.CIRCUIT, b"abc").encode()
        parser = FrameParser(1024)
        frames = []
        for k in range(len(stream)):
            frames.extend(parser.feed(stream[k : k + 1]))
        parser.close()
        assert frames == [Frame(FrameKind.HELLO, b"TTP1"), Frame(FrameKind.CIRCUIT, b"abc")]

    def test_oversized_frame(self):
        """Test a declared length beyond the limit."""
        with pytest.raises(ProtocolError):
            parse_header(HEADER.pack(2048, int(FrameKind.LOG)), 1024)

    def test_unknown_kind(self):
        """Test a frame kind outside the protocol."""
        with pytest.raises(ProtocolError):
            parse_header(HEADER.pack(0, 99), 1024)

    def test_truncated_stream(self):
        """Test end of stream inside a frame."""
        parser = FrameParser(1024)
        assert parser.feed(Frame(FrameKind.LOG, b"12345").encode()[:-2]) == []
        with pytest.raises(ProtocolError):
            parser.close()

    def test_random_bytes_only_raise_protocol_errors(self):
        """Test the parser on random input never fails any other way."""
        rng = rng_service.stream(77)
        for _ in range(500):
            parser = FrameParser(1024)
            data = rng.bytes(int(rng.integers(0, 64)))
            try:
                for frame in parser.feed(data):
                    assert isinstance(frame.kind, FrameKind)
                parser.close()
            except ProtocolError:
                pass

    def test_verdict_payload(self):
        """Test verdict encoding and its required flag."""
        data = parse_verdict(verdict_payload(True, "", {0: 1}))
        assert data == {"accepted": True, "reason": "", "bits": {"0": 1}}
        with pytest.raises(ProtocolError):
            parse_verdict(b'{"reason": "x"}')
