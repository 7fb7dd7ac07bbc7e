"""
Uniform KeyGen / Enc / Eval / VerDec handles over the schemes the games
are played against.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Optional

from app.exceptions import TrapTPError
from app.models.circuit import CircuitDesc
from app.models.game import Evaluated, GameOptions, SchemeName
from app.models.trap import VerDecResult
from app.models.traptp import MAX_BUDGET, SchemeParams, SchemeVariant, SideChannel, VqfheCiphertext
from app.services.css_code import get_code
from app.services.rng_service import RngStream
from app.services.statevector import StateVector
from app.services.trapcode_service import TrapCiphertext, TrapCodeService, reject_output, trapcode_service
from app.services.traptp_service import TrapTPService, traptp_service

logger = logging.getLogger("app.games")


@dataclass
class SchemeKeys:
    """Key material of one trial; ``evk`` is the only part an adversary sees."""

    sk: Any
    evk: Any
    side: Optional[SideChannel] = None


class SchemeAdapter(ABC):
    """Scheme as the challenger drives it."""

    name: SchemeName
    has_log: bool = False

    @abstractmethod
    def keygen(self, circuit: CircuitDesc, options: GameOptions, rng: RngStream) -> SchemeKeys:
        """Keys for one run of ``circuit`` (enough slots and resources for all its wires)."""

    @abstractmethod
    def encrypt(self, keys: SchemeKeys, state: StateVector, rng: RngStream, offset: int = 0) -> Any:
        """Encrypt a register into wires ``offset`` onward."""

    @abstractmethod
    def combine(self, first: Any, second: Any) -> Any:
        """Join two rounds' ciphertexts."""

    @abstractmethod
    def evaluate(self, evk: Any, ct: Any, circuit: CircuitDesc, rng: RngStream) -> Evaluated:
        """Honest evaluation."""

    @abstractmethod
    def verdec(self, keys: SchemeKeys, evaluated: Evaluated, rng: RngStream) -> VerDecResult:
        """Verified decryption against the claimed circuit; adversarial input never raises."""

    @abstractmethod
    def block_size(self, ct: Any) -> int:
        """Physical positions per trap block."""

    @abstractmethod
    def apply_attack(self, ct: Any, wire: int, x_bits=None, z_bits=None) -> None:
        """Physical Pauli on the block holding output ``wire``."""

    def public_bytes(self, ct: Any) -> bytes:
        """Classical part of a fresh ciphertext, as an adversary reads it."""
        return b""

    def _guarded(self, circuit: CircuitDesc, run) -> VerDecResult:
        try:
            return run()
        except TrapTPError as e:
            logger.info(f"Verified decryption rejected scheme={self.name.value} error={e}")
            return reject_output(circuit, f"unusable input: {e}")


class TrapCodeScheme(SchemeAdapter):
    """The trap code alone: no log, Pauli/CNOT/measurement circuits only."""

    name = SchemeName.TRAPCODE

    def __init__(self, service: Optional[TrapCodeService] = None):
        self.service = service or trapcode_service

    def keygen(self, circuit: CircuitDesc, options: GameOptions, rng: RngStream) -> SchemeKeys:
        return SchemeKeys(sk=self.service.keygen(circuit.n_wires, get_code(options.level), rng), evk=None)

    def encrypt(self, keys: SchemeKeys, state: StateVector, rng: RngStream, offset: int = 0) -> TrapCiphertext:
        return self.service.encrypt_into(keys.sk, state, offset)

    def combine(self, first: TrapCiphertext, second: TrapCiphertext) -> TrapCiphertext:
        return self.service.combine(first, second)

    def evaluate(self, evk: Any, ct: TrapCiphertext, circuit: CircuitDesc, rng: RngStream) -> Evaluated:
        return Evaluated(ct=self.service.eval_circuit(ct, circuit, rng), circuit=circuit)

    def verdec(self, keys: SchemeKeys, evaluated: Evaluated, rng: RngStream) -> VerDecResult:
        return self._guarded(evaluated.circuit, lambda: self.service.verdec(keys.sk, evaluated.ct, evaluated.circuit, rng))

    def block_size(self, ct: TrapCiphertext) -> int:
        return 3 * ct.register.m

    def apply_attack(self, ct: TrapCiphertext, wire: int, x_bits=None, z_bits=None) -> None:
        self.service.apply_attack(ct, wire, x_bits, z_bits)


class TrapTPScheme(SchemeAdapter):
    """
    TrapTP or one of its hybrids.

    With ``side_channel`` set, KeyGen and Enc also hand their signed values
    to VerDec; plain TrapTP receives them and ignores them.
    """

    has_log = True

    def __init__(
        self,
        variant: SchemeVariant = SchemeVariant.TRAPTP,
        side_channel: bool = False,
        service: Optional[TrapTPService] = None,
    ):
        self.variant = SchemeVariant(variant)
        self.side_channel = side_channel or self.variant is not SchemeVariant.TRAPTP
        self.service = service or traptp_service
        self.name = SchemeName(self.variant.value)

    def params(self, circuit: CircuitDesc, options: GameOptions) -> SchemeParams:
        return SchemeParams(
            level=options.level,
            t=min(MAX_BUDGET, circuit.t_count + options.budget_t),
            p=min(MAX_BUDGET, circuit.p_count + options.budget_p),
            h=min(MAX_BUDGET, circuit.h_count + options.budget_h),
        )

    def keygen(self, circuit: CircuitDesc, options: GameOptions, rng: RngStream) -> SchemeKeys:
        side = SideChannel() if self.side_channel else None
        sk, evk = self.service.keygen(self.params(circuit, options), rng, side)
        return SchemeKeys(sk=sk, evk=evk, side=side)

    def encrypt(self, keys: SchemeKeys, state: StateVector, rng: RngStream, offset: int = 0) -> VqfheCiphertext:
        return self.service.enc(keys.sk, state, rng, keys.side, offset)

    def combine(self, first: VqfheCiphertext, second: VqfheCiphertext) -> VqfheCiphertext:
        return self.service.combine(first, second)

    def evaluate(self, evk: Any, ct: VqfheCiphertext, circuit: CircuitDesc, rng: RngStream) -> Evaluated:
        out, log = self.service.eval_circuit(evk, ct, circuit, rng)
        return Evaluated(ct=out, circuit=circuit, log=log.to_text())

    def verdec(self, keys: SchemeKeys, evaluated: Evaluated, rng: RngStream) -> VerDecResult:
        return self._guarded(
            evaluated.circuit,
            lambda: self.service.verdec(
                keys.sk, evaluated.ct, evaluated.log, evaluated.circuit, rng, self.variant, keys.side
            ),
        )

    def block_size(self, ct: VqfheCiphertext) -> int:
        return 3 * ct.register.m

    def apply_attack(self, ct: VqfheCiphertext, wire: int, x_bits=None, z_bits=None) -> None:
        ct.register.apply_physical_pauli(ct.block_id(wire), x_bits, z_bits)

    def public_bytes(self, ct: VqfheCiphertext) -> bytes:
        return b"".join(ct.pads[label].message for label in sorted(ct.pads))


def make_scheme(name, side_channel: bool = False) -> SchemeAdapter:
    """Adapter by scheme name ("trapcode", "traptp", "prime", "double-prime")."""
    name = SchemeName(name)
    if name is SchemeName.TRAPCODE:
        return TrapCodeScheme()
    return TrapTPScheme(SchemeVariant(name.value), side_channel=side_channel)
