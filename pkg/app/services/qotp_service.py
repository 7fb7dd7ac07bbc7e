"""
One-time programs for circuits with classical inputs and outputs.

The sender generates keys, encrypts its input bits next to |0> wires for
the receiver's input and the ancillas, and wraps verified decryption of the
public circuit in a single-use token. The receiver writes its bits with X
gates, evaluates homomorphically and spends the token on its log.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from app.exceptions import CircuitError, TokenReuseError
from app.models.circuit import CircuitDesc, Gate, GateKind
from app.models.trap import VerDecResult
from app.models.traptp import EvalKey, SchemeParams, VqfheCiphertext
from app.services.rng_service import RngStream, rng_service
from app.services.statevector import qsim
from app.services.traptp_service import TrapTPService, traptp_service

logger = logging.getLogger("app.traptp")


def t_dagger(w: int) -> list[str]:
    return [f"T {w}", f"P {w}", f"Z {w}"]


def toffoli(a: int, b: int, c: int) -> list[str]:
    """Toffoli over Clifford+T; each T-dagger is written as T, P, Z."""
    return [
        f"H {c}",
        f"CNOT {b} {c}",
        *t_dagger(c),
        f"CNOT {a} {c}",
        f"T {c}",
        f"CNOT {b} {c}",
        *t_dagger(c),
        f"CNOT {a} {c}",
        f"T {b}",
        f"T {c}",
        f"H {c}",
        f"CNOT {a} {b}",
        f"T {a}",
        *t_dagger(b),
        f"CNOT {a} {b}",
    ]


def and_circuit() -> CircuitDesc:
    """Sender bit on wire 0, receiver bit on wire 1, their AND measured on wire 2."""
    return CircuitDesc.from_text("\n".join(["wires 3", "outputs 2", *toffoli(0, 1, 2), "MEAS 2 Z"]))


class OneTimeToken:
    """Single-query wrapper around a classical function."""

    def __init__(self, fn: Callable[..., VerDecResult]):
        self._fn: Optional[Callable[..., VerDecResult]] = fn

    @property
    def consumed(self) -> bool:
        return self._fn is None

    def query(self, *args, **kwargs) -> VerDecResult:
        if self._fn is None:
            raise TokenReuseError("one-time token was already queried")
        fn, self._fn = self._fn, None
        return fn(*args, **kwargs)


@dataclass
class OneTimeProgram:
    """What the receiver holds: evaluation key, encrypted sender input and the token."""

    body: CircuitDesc
    sender_wires: tuple[int, ...]
    receiver_wires: tuple[int, ...]
    evk: EvalKey
    ct: VqfheCiphertext
    token: OneTimeToken

    def circuit_for(self, receiver_bits: Sequence[int]) -> CircuitDesc:
        return write_input(self.body, self.receiver_wires, receiver_bits)


def write_input(body: CircuitDesc, wires: Sequence[int], bits: Sequence[int]) -> CircuitDesc:
    """``body`` preceded by X on every input wire whose bit is 1."""
    if len(bits) != len(wires) or any(b not in (0, 1) for b in bits):
        raise CircuitError(f"expected {len(wires)} input bits, got {list(bits)}")
    prefix = [Gate(kind=GateKind.X, wires=(w,)) for w, b in zip(wires, bits) if b]
    return body.with_gates((*prefix, *body.gates))


class QotpService:
    """Create and execute one-time programs."""

    def __init__(self, service: Optional[TrapTPService] = None):
        self.service = service or traptp_service
        self.logger = logger

    def create(
        self,
        body: CircuitDesc,
        sender_bits: Sequence[int],
        n_receiver: int,
        rng: RngStream,
        level: int = 1,
    ) -> OneTimeProgram:
        """
        Sender side.

        Args:
            body: Public circuit; wires are sender inputs, then receiver inputs, then ancillas
            sender_bits: Sender's classical input
            n_receiver: Number of receiver input wires
            rng: Key and encryption randomness
            level: Code level

        Returns:
            The program handed to the receiver
        """
        if body.quantum_outputs:
            raise CircuitError("one-time programs need a circuit whose outputs are all measured")
        n_sender = len(sender_bits)
        if n_sender + n_receiver > body.n_wires:
            raise CircuitError(f"circuit has {body.n_wires} wires, inputs need {n_sender + n_receiver}")
        sender_wires = tuple(range(n_sender))
        receiver_wires = tuple(range(n_sender, n_sender + n_receiver))
        params = SchemeParams(level=level, t=body.t_count, p=body.p_count, h=body.h_count)
        sk, evk = self.service.keygen(params, rng)
        init = "".join(str(int(b)) for b in sender_bits) + "0" * (body.n_wires - n_sender)
        ct = self.service.enc(sk, qsim.new_register(body.n_wires, init), rng)

        def verify(receiver_bits: Sequence[int], result: VqfheCiphertext, log: str, query_rng: RngStream) -> VerDecResult:
            return self.service.verdec(sk, result, log, write_input(body, receiver_wires, receiver_bits), query_rng)

        self.logger.info(f"One-time program created wires={body.n_wires} t={params.t} sender_bits={n_sender}")
        return OneTimeProgram(body, sender_wires, receiver_wires, evk, ct, OneTimeToken(verify))

    def execute(self, program: OneTimeProgram, receiver_bits: Sequence[int], rng: RngStream) -> VerDecResult:
        """Receiver side: evaluate with the receiver's bits written in, then spend the token."""
        circuit = program.circuit_for(receiver_bits)
        result, log = self.service.eval_circuit(program.evk, program.ct, circuit, rng)
        return program.token.query(receiver_bits, result, log.to_text(), rng)

    def qotp_demo(
        self,
        sender_bits: Sequence[int] = (1,),
        receiver_bits: Sequence[int] = (1,),
        seed: int = 0,
        body: Optional[CircuitDesc] = None,
    ) -> VerDecResult:
        """Create and execute a program in one go (the AND circuit by default)."""
        body = body or and_circuit()
        rng = rng_service.stream(seed)
        program = self.create(body, sender_bits, len(receiver_bits), rng)
        output = self.execute(program, receiver_bits, rng)
        self.logger.info(f"One-time program executed accepted={output.accepted} bits={output.bits}")
        return output


# Global instance
qotp_service = QotpService()
