"""
Evaluation server: receives an evaluation key, a ciphertext and a circuit,
evaluates homomorphically and returns the result with its computation log.
"""

import asyncio
import logging
from typing import Optional

from app.context import trial_id_var
from app.exceptions import ProtocolError, TrapTPError
from app.services.config_service import Settings, config_service
from app.services.rng_service import RngStream, rng_service
from app.services.serialization_service import serialization_service
from app.services.traptp_service import traptp_service
from app.transport.protocol import (
    PROTOCOL_VERSION,
    FrameKind,
    check_hello,
    expect,
    parse_verdict,
    read_frame,
    send_error,
    write_frame,
)

logger = logging.getLogger("app.transport")


def flip_log_byte(text: str, rng: RngStream) -> str:
    """One byte of the log XORed with a random nonzero value."""
    raw = bytearray(text.encode("latin-1"))
    position = int(rng.integers(0, len(raw)))
    raw[position] ^= int(rng.integers(1, 256))
    return raw.decode("latin-1")


class DelegationServer:
    """
    Serves one delegation session at a time.

    ``tamper_log`` makes the server flip one byte of every log it returns,
    which an honest client must reject.
    """

    def __init__(self, settings: Optional[Settings] = None, tamper_log: bool = False):
        self.settings = settings or config_service.settings
        self.tamper_log = tamper_log
        self.sessions = 0
        self._lock = asyncio.Lock()
        self._server: Optional[asyncio.AbstractServer] = None
        self.logger = logger

    @property
    def port(self) -> int:
        if self._server is None or not self._server.sockets:
            raise ProtocolError("server is not listening")
        return self._server.sockets[0].getsockname()[1]

    async def start(self, host: Optional[str] = None, port: Optional[int] = None) -> asyncio.AbstractServer:
        default_host, default_port = self.settings.host_port
        host = default_host if host is None else host
        port = default_port if port is None else port
        self._server = await asyncio.start_server(self.handle, host, port)
        self.logger.info(f"Delegation server listening host={host} port={self.port} tamper_log={self.tamper_log}")
        return self._server

    async def serve_forever(self) -> None:
        if self._server is None:
            await self.start()
        async with self._server:
            await self._server.serve_forever()

    async def close(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    async def handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        async with self._lock:
            self.sessions += 1
            session = self.sessions
            token = trial_id_var.set(f"session-{session}")
            try:
                await self._session(reader, writer, rng_service.stream(self.settings.seed).split(session))
            except ProtocolError as e:
                self.logger.warning(f"Session aborted session={session} error={e}")
                await send_error(writer, str(e))
            except TrapTPError as e:
                self.logger.error(f"Evaluation failed session={session} error={e}")
                await send_error(writer, f"evaluation failed: {e}")
            finally:
                trial_id_var.reset(token)
                writer.close()
                try:
                    await writer.wait_closed()
                except ConnectionError:
                    pass

    async def _session(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter, rng: RngStream) -> None:
        max_size = self.settings.max_frame_size
        check_hello(await expect(reader, FrameKind.HELLO, max_size))
        await write_frame(writer, FrameKind.HELLO, PROTOCOL_VERSION)

        evk = serialization_service.decode_eval_key(await expect(reader, FrameKind.EVK, max_size))
        ct = serialization_service.decode_ciphertext(await expect(reader, FrameKind.CIPHERTEXT, max_size))
        circuit = serialization_service.decode_circuit(await expect(reader, FrameKind.CIRCUIT, max_size))
        self.logger.info(f"Session evaluating wires={circuit.n_wires} gates={len(circuit)} t={circuit.t_count}")

        result, log = traptp_service.eval_circuit(evk, ct, circuit, rng)
        text = log.to_text()
        if self.tamper_log:
            text = flip_log_byte(text, rng)
        await write_frame(writer, FrameKind.RESULT_CT, serialization_service.encode_ciphertext(result))
        await write_frame(writer, FrameKind.LOG, serialization_service.encode_log_text(text))

        frame = await read_frame(reader, max_size)
        if frame is None:
            self.logger.info("Session closed without a verdict")
        elif frame.kind is FrameKind.VERDICT:
            verdict = parse_verdict(frame.payload)
            self.logger.info(f"Session verdict accepted={verdict['accepted']} reason={verdict.get('reason', '')!r}")
        else:
            raise ProtocolError(f"expected VERDICT, got {frame.kind.name}")
