"""
Byte formats for everything that crosses the delegation wire.

A record is ``TTPR``, a version byte, a kind byte, a 4-byte big-endian
header length, a canonical JSON header and then the amplitude tables of
the quantum factors it mentions. An amplitude table is a 4-byte
little-endian qubit count followed by 2^n IEEE-754 binary64 (re, im)
pairs, little-endian. Block ids and qubit handles are process-local, so
records refer to blocks and qubits by position and decoding allocates
fresh ids.
"""

import json
import logging
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Any

import numpy as np

from app.exceptions import ProtocolError, TrapTPError
from app.models.circuit import CircuitDesc
from app.models.crypto import HeCiphertext, SignedMessage
from app.models.log import ComputationLog
from app.models.quantum import Basis
from app.models.traptp import EvalKey, SchemeParams, VqfheCiphertext
from app.services.block_register import BlockRegister, TrapBlock
from app.services.css_code import get_code
from app.services.statevector import StateVector, qubit_cap

logger = logging.getLogger("app.transport")

RECORD_MAGIC = b"TTPR"
RECORD_VERSION = 1
_PREFIX = struct.Struct(">4sBBI")
_QUBITS = struct.Struct("<I")


class RecordKind(IntEnum):
    STATE = 1
    CIRCUIT = 2
    LOG = 3
    EVAL_KEY = 4
    CIPHERTEXT = 5


@dataclass
class _Reader:
    data: bytes
    offset: int = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.offset + n > len(self.data):
            raise ProtocolError(f"record truncated: wanted {n} bytes at offset {self.offset} of {len(self.data)}")
        chunk = self.data[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def done(self) -> None:
        if self.offset != len(self.data):
            raise ProtocolError(f"{len(self.data) - self.offset} trailing bytes after record")


def _bits_text(values) -> str:
    return "".join(str(int(b)) for b in values)


def _bits_array(text: str, size: int) -> np.ndarray:
    if len(text) != size or set(text) - {"0", "1"}:
        raise ProtocolError(f"expected {size} bits, got {text!r}")
    return np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0")


def _signed(record: SignedMessage) -> dict:
    return {"label": record.label, "message": record.message.hex(), "tag": record.tag.hex()}


def _unsigned(data: dict) -> SignedMessage:
    return SignedMessage(label=data["label"], message=bytes.fromhex(data["message"]), tag=bytes.fromhex(data["tag"]))


class SerializationService:
    """Encode and decode states, circuits, logs, evaluation keys and ciphertexts."""

    def __init__(self):
        self.logger = logger

    # amplitude tables

    def encode_state(self, state: StateVector) -> bytes:
        return _QUBITS.pack(state.n_qubits) + state.amplitudes.astype("<c16").tobytes()

    def _read_state(self, reader: _Reader) -> StateVector:
        (n,) = _QUBITS.unpack(reader.take(_QUBITS.size))
        if n > qubit_cap():
            raise ProtocolError(f"amplitude table of {n} qubits exceeds the qubit cap")
        amps = np.frombuffer(reader.take(16 << n), dtype="<c16").astype(np.complex128)
        if not np.all(np.isfinite(amps)) or abs(np.linalg.norm(amps) - 1) > 1e-6:
            raise ProtocolError("amplitude table is not a normalized state")
        return StateVector(n, amps)

    def decode_state(self, data: bytes) -> StateVector:
        reader = _Reader(data)
        state = self._read_state(reader)
        reader.done()
        return state

    # record container

    def _pack(self, kind: RecordKind, header: dict, states: list[StateVector] = ()) -> bytes:
        head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("ascii")
        body = b"".join(self.encode_state(s) for s in states)
        return _PREFIX.pack(RECORD_MAGIC, RECORD_VERSION, int(kind), len(head)) + head + body

    def _unpack(self, data: bytes, kind: RecordKind) -> tuple[dict, _Reader]:
        reader = _Reader(data)
        magic, version, got, length = _PREFIX.unpack(reader.take(_PREFIX.size))
        if magic != RECORD_MAGIC:
            raise ProtocolError("not a record")
        if version != RECORD_VERSION:
            raise ProtocolError(f"record version {version} is not supported")
        if got != kind:
            raise ProtocolError(f"expected a {kind.name} record, got kind {got}")
        try:
            header = json.loads(reader.take(length).decode("ascii"))
        except (UnicodeDecodeError, ValueError) as e:
            raise ProtocolError(f"record header is malformed: {e}") from e
        if not isinstance(header, dict):
            raise ProtocolError("record header is not an object")
        return header, reader

    def _decoded(self, data: bytes, kind: RecordKind, build) -> Any:
        """Run ``build`` on the unpacked record; every failure becomes a ProtocolError."""
        header, reader = self._unpack(data, kind)
        try:
            value = build(header, reader)
        except ProtocolError:
            raise
        except (TrapTPError, KeyError, TypeError, ValueError, IndexError) as e:
            self.logger.warning(f"Record rejected kind={kind.name} error={e}")
            raise ProtocolError(f"{kind.name} record is malformed: {e}") from e
        reader.done()
        return value

    # circuits and logs

    def encode_circuit(self, circuit: CircuitDesc) -> bytes:
        return self._pack(RecordKind.CIRCUIT, {"text": circuit.to_text()})

    def decode_circuit(self, data: bytes) -> CircuitDesc:
        return self._decoded(data, RecordKind.CIRCUIT, lambda h, _: CircuitDesc.from_text(h["text"]))

    def encode_log(self, log: ComputationLog) -> bytes:
        return self.encode_log_text(log.to_text())

    def encode_log_text(self, text: str) -> bytes:
        return self._pack(RecordKind.LOG, {"text": text})

    def decode_log_text(self, data: bytes) -> str:
        """Log text without parsing it; verification does the strict parse."""
        return self._decoded(data, RecordKind.LOG, lambda h, _: str(h["text"]))

    def decode_log(self, data: bytes) -> ComputationLog:
        return ComputationLog.from_text(self.decode_log_text(data))

    # registers

    def _register_header(self, register: BlockRegister) -> tuple[dict, list[StateVector], dict[int, int]]:
        handle_index: dict[int, int] = {}
        factors, states = [], []
        for factor in register.workspace.factors():
            positions = []
            for h in factor.handles:
                handle_index[h] = len(handle_index)
                positions.append(handle_index[h])
            factors.append(positions)
            states.append(factor.state)
        block_index: dict[int, int] = {}
        blocks = []
        for block_id in sorted(register.blocks):
            blk = register.blocks[block_id]
            block_index[block_id] = len(blocks)
            blocks.append(
                {
                    "handle": None if blk.handle is None else handle_index[blk.handle],
                    "perm": [int(p) for p in blk.perm],
                    "x": _bits_text(blk.x_frame),
                    "z": _bits_text(blk.z_frame),
                    "label": blk.label,
                    "record": None if blk.record is None else _bits_text(blk.record),
                    "basis": None if blk.record_basis is None else blk.record_basis.value,
                    "opened": blk.opened,
                }
            )
        header = {"level": register.code.level, "factors": factors, "blocks": blocks}
        return header, states, block_index

    def _read_register(self, header: dict, reader: _Reader) -> tuple[BlockRegister, list[int]]:
        register = BlockRegister(get_code(int(header["level"])))
        size = 3 * register.m
        handles: dict[int, int] = {}
        for positions in header["factors"]:
            state = self._read_state(reader)
            if state.n_qubits != len(positions):
                raise ProtocolError(f"factor lists {len(positions)} qubits, its table holds {state.n_qubits}")
            for position, handle in zip(positions, register.workspace.add(state)):
                if position in handles:
                    raise ProtocolError(f"qubit {position} appears twice")
                handles[int(position)] = handle
        ids = []
        for entry in header["blocks"]:
            perm = np.asarray(entry["perm"], dtype=np.int64)
            if sorted(perm.tolist()) != list(range(size)):
                raise ProtocolError("block permutation is not a permutation")
            measured = entry["record"] is not None
            blk = TrapBlock(
                block_id=0,
                handle=None if entry["handle"] is None else handles[int(entry["handle"])],
                perm=perm,
                x_frame=_bits_array(entry["x"], size),
                z_frame=_bits_array(entry["z"], size),
                label=str(entry["label"]),
                record=_bits_array(entry["record"], size) if measured else None,
                record_basis=Basis(entry["basis"]) if measured else None,
                opened=bool(entry["opened"]),
            )
            ids.append(register.restore_block(blk))
        return register, ids

    # evaluation keys and ciphertexts

    def encode_eval_key(self, evk: EvalKey) -> bytes:
        register, states, index = self._register_header(evk.register)
        header = {
            "params": evk.params.model_dump(),
            "keys": _signed(evk.keys),
            "register": register,
            "blocks": {name: index[block_id] for name, block_id in evk.blocks.items()},
            "pads": {label: _signed(record) for label, record in evk.pads.items()},
            "gadgets": {str(i): _signed(record) for i, record in evk.gadgets.items()},
            "consumed": evk.consumed,
        }
        return self._pack(RecordKind.EVAL_KEY, header, states)

    def decode_eval_key(self, data: bytes) -> EvalKey:
        def build(header: dict, reader: _Reader) -> EvalKey:
            register, ids = self._read_register(header["register"], reader)
            return EvalKey(
                params=SchemeParams(**header["params"]),
                keys=_unsigned(header["keys"]),
                register=register,
                blocks={str(name): ids[int(k)] for name, k in header["blocks"].items()},
                pads={str(label): _unsigned(record) for label, record in header["pads"].items()},
                gadgets={int(i): _unsigned(record) for i, record in header["gadgets"].items()},
                consumed=bool(header["consumed"]),
            )

        return self._decoded(data, RecordKind.EVAL_KEY, build)

    def encode_ciphertext(self, ct: VqfheCiphertext) -> bytes:
        register, states, index = self._register_header(ct.register)
        header = {
            "register": register,
            "wires": {str(w): name for w, name in ct.wires.items()},
            "blocks": {name: index[block_id] for name, block_id in ct.blocks.items()},
            "pads": {label: _signed(record) for label, record in ct.pads.items()},
            "final_pads": {str(w): [x.to_text(), z.to_text()] for w, (x, z) in ct.final_pads.items()},
            "epoch": ct.epoch,
        }
        return self._pack(RecordKind.CIPHERTEXT, header, states)

    def decode_ciphertext(self, data: bytes) -> VqfheCiphertext:
        def build(header: dict, reader: _Reader) -> VqfheCiphertext:
            register, ids = self._read_register(header["register"], reader)
            final_pads = {}
            for w, (x, z) in header["final_pads"].items():
                final_pads[int(w)] = (HeCiphertext.from_text(x), HeCiphertext.from_text(z))
            return VqfheCiphertext(
                register=register,
                wires={int(w): str(name) for w, name in header["wires"].items()},
                blocks={str(name): ids[int(k)] for name, k in header["blocks"].items()},
                pads={str(label): _unsigned(record) for label, record in header["pads"].items()},
                final_pads=final_pads,
                epoch=int(header["epoch"]),
            )

        return self._decoded(data, RecordKind.CIPHERTEXT, build)


# Global instance
serialization_service = SerializationService()
