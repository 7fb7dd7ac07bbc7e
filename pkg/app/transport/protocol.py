"""
Framed delegation protocol.

A frame is a 4-byte big-endian payload length, a 1-byte kind and the
payload. A session runs:

    client -> HELLO "TTP1"          server -> HELLO "TTP1"
    client -> EVK, CIPHERTEXT, CIRCUIT
                                    server -> RESULT_CT, LOG
    client -> VERDICT (JSON, informational)

Either side answers a violation with an ERROR frame (UTF-8 reason) and
closes the connection. Quantum data travels as amplitude tables inside the
EVK, CIPHERTEXT and RESULT_CT records; a real deployment would move qubits
instead.
"""

import asyncio
import json
import logging
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

from app.exceptions import ProtocolError

logger = logging.getLogger("app.transport")

PROTOCOL_VERSION = b"TTP1"
HEADER = struct.Struct(">IB")
HEADER_SIZE = HEADER.size


class FrameKind(IntEnum):
    HELLO = 1
    EVK = 2
    CIPHERTEXT = 3
    CIRCUIT = 4
    RESULT_CT = 5
    LOG = 6
    VERDICT = 7
    ERROR = 8


@dataclass(frozen=True)
class Frame:
    kind: FrameKind
    payload: bytes = b""

    def encode(self) -> bytes:
        return HEADER.pack(len(self.payload), int(self.kind)) + self.payload


def parse_header(header: bytes, max_size: int) -> tuple[int, FrameKind]:
    """Length and kind of a frame header; oversized or unknown frames raise ProtocolError."""
    length, kind = HEADER.unpack(header)
    if length > max_size:
        raise ProtocolError(f"frame of {length} bytes exceeds the maximum of {max_size}")
    try:
        return length, FrameKind(kind)
    except ValueError as e:
        raise ProtocolError(f"unknown frame kind {kind}") from e


class FrameParser:
    """Incremental parser over a byte stream (used for buffered input and fuzzing)."""

    def __init__(self, max_size: int):
        self.max_size = max_size
        self._buffer = bytearray()

    @property
    def pending(self) -> int:
        return len(self._buffer)

    def feed(self, data: bytes) -> list[Frame]:
        self._buffer.extend(data)
        frames = []
        while len(self._buffer) >= HEADER_SIZE:
            length, kind = parse_header(bytes(self._buffer[:HEADER_SIZE]), self.max_size)
            if len(self._buffer) < HEADER_SIZE + length:
                break
            frames.append(Frame(kind, bytes(self._buffer[HEADER_SIZE : HEADER_SIZE + length])))
            del self._buffer[: HEADER_SIZE + length]
        return frames

    def close(self) -> None:
        """End of stream; leftover bytes mean a truncated frame."""
        if self._buffer:
            raise ProtocolError(f"stream ended inside a frame ({len(self._buffer)} bytes pending)")


async def read_frame(reader: asyncio.StreamReader, max_size: int) -> Optional[Frame]:
    """
    Read one frame.

    Returns:
        The frame, or None when the peer closed the connection between frames
    """
    try:
        header = await reader.readexactly(HEADER_SIZE)
    except asyncio.IncompleteReadError as e:
        if e.partial:
            raise ProtocolError("connection closed inside a frame header") from e
        return None
    length, kind = parse_header(header, max_size)
    try:
        payload = await reader.readexactly(length)
    except asyncio.IncompleteReadError as e:
        raise ProtocolError(f"frame truncated: {len(e.partial)} of {length} payload bytes") from e
    return Frame(kind, payload)


async def write_frame(writer: asyncio.StreamWriter, kind: FrameKind, payload: bytes = b"") -> None:
    writer.write(Frame(kind, payload).encode())
    await writer.drain()


async def expect(reader: asyncio.StreamReader, kind: FrameKind, max_size: int) -> bytes:
    """Payload of the next frame, which must be of ``kind``."""
    frame = await read_frame(reader, max_size)
    if frame is None:
        raise ProtocolError(f"connection closed while waiting for {kind.name}")
    if frame.kind is FrameKind.ERROR:
        raise ProtocolError(f"peer reported an error: {frame.payload.decode('utf-8', errors='replace')}")
    if frame.kind is not kind:
        raise ProtocolError(f"expected {kind.name}, got {frame.kind.name}")
    return frame.payload


async def send_error(writer: asyncio.StreamWriter, reason: str) -> None:
    """Best-effort ERROR frame; the connection may already be gone."""
    try:
        await write_frame(writer, FrameKind.ERROR, reason.encode("utf-8"))
    except (ConnectionError, RuntimeError) as e:
        logger.debug(f"Error frame not delivered reason={reason!r} error={e}")


def check_hello(payload: bytes) -> None:
    if payload != PROTOCOL_VERSION:
        raise ProtocolError(f"protocol version {payload!r} is not {PROTOCOL_VERSION!r}")


def verdict_payload(accepted: bool, reason: str = "", bits: Optional[dict[int, int]] = None) -> bytes:
    data = {"accepted": accepted, "reason": reason, "bits": {str(w): b for w, b in (bits or {}).items()}}
    return json.dumps(data, sort_keys=True, separators=(",", ":")).encode("utf-8")


def parse_verdict(payload: bytes) -> dict:
    try:
        data = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as e:
        raise ProtocolError(f"verdict is malformed: {e}") from e
    if not isinstance(data, dict) or not isinstance(data.get("accepted"), bool):
        raise ProtocolError("verdict lacks the accepted flag")
    return data
