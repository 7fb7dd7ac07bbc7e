"""
Delegating client: KeyGen and Enc locally, Eval on the server, VerDec
locally again.
"""

import asyncio
import logging
from dataclasses import dataclass
from typing import Optional

from app.exceptions import BudgetError, ConfigError
from app.models.circuit import CircuitDesc
from app.models.trap import VerDecResult
from app.models.traptp import SchemeParams
from app.services.config_service import Settings, config_service
from app.services.rng_service import rng_service
from app.services.serialization_service import serialization_service
from app.services.statevector import StateVector, qsim
from app.services.traptp_service import traptp_service
from app.transport.protocol import PROTOCOL_VERSION, FrameKind, check_hello, expect, send_error, verdict_payload, write_frame

logger = logging.getLogger("app.transport")


@dataclass
class DelegationResult:
    result: VerDecResult
    circuit: CircuitDesc
    log_text: str


def input_state(bits: Optional[str], n_wires: int) -> StateVector:
    """Product input from a string over "01+-" (all zeros when omitted)."""
    bits = "0" * n_wires if not bits else bits
    if len(bits) != n_wires or set(bits) - set("01+-"):
        raise ConfigError(f"input must give one of 0, 1, +, - for each of {n_wires} wires, got {bits!r}")
    return qsim.new_register(n_wires, bits)


class DelegationClient:
    """Client side of one delegation session."""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or config_service.settings
        self.logger = logger

    def params_for(self, circuit: CircuitDesc) -> SchemeParams:
        """Key parameters from the configured budgets, which must cover the circuit."""
        t, p, h = self.settings.budgets
        if circuit.t_count > t or circuit.p_count > p or circuit.h_count > h:
            raise BudgetError(
                f"circuit needs t={circuit.t_count} p={circuit.p_count} h={circuit.h_count}, "
                f"budgets are t={t} p={p} h={h}"
            )
        return SchemeParams(level=self.settings.level, t=t, p=p, h=h)

    async def delegate(
        self,
        circuit: CircuitDesc,
        state: StateVector,
        host: Optional[str] = None,
        port: Optional[int] = None,
    ) -> DelegationResult:
        """
        Run one session against a server.

        Args:
            circuit: Circuit the server should apply
            state: Plaintext input on ``circuit.n_wires`` qubits
            host: Server host (configured address by default)
            port: Server port (configured address by default)

        Returns:
            The locally verified and decrypted output with the log the server sent
        """
        default_host, default_port = self.settings.host_port
        host = default_host if host is None else host
        port = default_port if port is None else port
        max_size = self.settings.max_frame_size
        rng = rng_service.stream(self.settings.seed)
        sk, evk = traptp_service.keygen(self.params_for(circuit), rng)
        ct = traptp_service.enc(sk, state, rng)

        reader, writer = await asyncio.open_connection(host, port)
        try:
            await write_frame(writer, FrameKind.HELLO, PROTOCOL_VERSION)
            check_hello(await expect(reader, FrameKind.HELLO, max_size))
            await write_frame(writer, FrameKind.EVK, serialization_service.encode_eval_key(evk))
            await write_frame(writer, FrameKind.CIPHERTEXT, serialization_service.encode_ciphertext(ct))
            await write_frame(writer, FrameKind.CIRCUIT, serialization_service.encode_circuit(circuit))
            result_ct = serialization_service.decode_ciphertext(await expect(reader, FrameKind.RESULT_CT, max_size))
            log_text = serialization_service.decode_log_text(await expect(reader, FrameKind.LOG, max_size))

            result = traptp_service.verdec(sk, result_ct, log_text, circuit, rng)
            await write_frame(writer, FrameKind.VERDICT, verdict_payload(result.accepted, result.reason, result.bits))
        except Exception as e:
            await send_error(writer, str(e))
            raise
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except ConnectionError:
                pass
        self.logger.info(f"Delegation finished host={host} port={port} accepted={result.accepted} bits={result.bits}")
        return DelegationResult(result=result, circuit=circuit, log_text=log_text)
