"""
Built-in adversaries for the security games.

An adversary is a set of stages the challenger calls once each, in order:
``choose_input``, ``evaluate`` and ``guess``; the two-round game calls
``choose_first`` and ``choose_second`` in place of ``choose_input``. Stages
share state through the memo they return.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Optional

from app.exceptions import AdversaryContractError
from app.models.circuit import Gate, GateKind
from app.models.crypto import SignedMessage
from app.models.game import Delivered, Evaluated, GameOptions
from app.models.log import ComputationLog, LogEntryKind
from app.models.quantum import Basis
from app.models.traptp import VqfheCiphertext, record_outputs
from app.services.rng_service import RngStream
from app.services.scheme_adapters import SchemeAdapter
from app.services.statevector import StateVector, qsim
from app.services.trapcode_service import random_positions

logger = logging.getLogger("app.games")

MAC_TAG_BYTES = 16


@dataclass
class AdversaryView:
    """What the challenger shows an adversary: the scheme's public side and the evaluation key."""

    scheme: SchemeAdapter
    evk: Any
    options: GameOptions


class Adversary:
    """Honest behaviour for every stage; subclasses override what they attack."""

    name = "honest"
    description = "Random input, honest evaluation, random guess"
    requires_log = False

    def choose_first(self, view: AdversaryView, n_wires: int, rng: RngStream) -> tuple[StateVector, Any]:
        return self.choose_input(view, n_wires, rng)

    def choose_input(self, view: AdversaryView, n_wires: int, rng: RngStream, memo: Any = None) -> tuple[StateVector, Any]:
        return qsim.random_state(n_wires, rng), memo

    def choose_second(
        self, view: AdversaryView, first: Any, n_wires: int, rng: RngStream, memo: Any
    ) -> tuple[StateVector, Any]:
        return self.choose_input(view, n_wires, rng, memo)

    def evaluate(self, view: AdversaryView, ct: Any, circuit, rng: RngStream, memo: Any) -> Evaluated:
        return view.scheme.evaluate(view.evk, ct, circuit, rng)

    def guess(self, delivered: Delivered, rng: RngStream, memo: Any) -> int:
        return rng.bit()


class GuessZeroAdversary(Adversary):
    name = "guess-zero"
    description = "Honest play, always guesses r = 0"

    def guess(self, delivered: Delivered, rng: RngStream, memo: Any) -> int:
        return 0


class AcceptanceGuesser(Adversary):
    """Deviates during evaluation and guesses r = 0 iff its deviation survived."""

    def guess(self, delivered: Delivered, rng: RngStream, memo: Any) -> int:
        return 0 if delivered.accepted else 1

    @staticmethod
    def target_wire(evaluated: Evaluated) -> int:
        quantum = evaluated.circuit.quantum_outputs
        if not quantum:
            raise AdversaryContractError("the circuit leaves no quantum output to attack")
        return quantum[-1]


class SinglePauliAdversary(AcceptanceGuesser):
    name = "single-pauli"
    description = "Random X, Y or Z on one random physical position of the last quantum output"

    def evaluate(self, view: AdversaryView, ct: Any, circuit, rng: RngStream, memo: Any) -> Evaluated:
        evaluated = view.scheme.evaluate(view.evk, ct, circuit, rng)
        size = view.scheme.block_size(evaluated.ct)
        position = int(rng.integers(0, size))
        kind = int(rng.integers(1, 4))
        x_bits, z_bits = [0] * size, [0] * size
        x_bits[position] = kind & 1
        z_bits[position] = kind >> 1
        view.scheme.apply_attack(evaluated.ct, self.target_wire(evaluated), x_bits, z_bits)
        evaluated.tampered = True
        return evaluated


class FixedWeightAdversary(AcceptanceGuesser):
    """X (or Z) errors on ``weight`` distinct random positions of one output block."""

    name = "fixed-weight"
    description = "Weight-w X or Z attack on the last quantum output"

    def __init__(self, weight: Optional[int] = None, basis: Optional[str] = None):
        self.weight = weight
        self.basis = basis

    def evaluate(self, view: AdversaryView, ct: Any, circuit, rng: RngStream, memo: Any) -> Evaluated:
        evaluated = view.scheme.evaluate(view.evk, ct, circuit, rng)
        size = view.scheme.block_size(evaluated.ct)
        weight = self.weight or view.options.weight
        if weight > size:
            raise AdversaryContractError(f"weight {weight} exceeds the block size {size}")
        pauli = [0] * size
        for position in random_positions(rng, size, weight):
            pauli[position] = 1
        if Basis(self.basis or view.options.basis) is Basis.X:
            view.scheme.apply_attack(evaluated.ct, self.target_wire(evaluated), x_bits=pauli)
        else:
            view.scheme.apply_attack(evaluated.ct, self.target_wire(evaluated), z_bits=pauli)
        evaluated.tampered = True
        return evaluated


class LogTamperAdversary(AcceptanceGuesser):
    name = "log-tamper"
    description = "Honest evaluation, then one byte of the log XORed with a random nonzero value"
    requires_log = True

    def evaluate(self, view: AdversaryView, ct: Any, circuit, rng: RngStream, memo: Any) -> Evaluated:
        evaluated = view.scheme.evaluate(view.evk, ct, circuit, rng)
        raw = bytearray(evaluated.log.encode("latin-1"))
        position = int(rng.integers(0, len(raw)))
        raw[position] ^= int(rng.integers(1, 256))
        evaluated.log = raw.decode("latin-1")
        evaluated.tampered = True
        return evaluated


class WrongCircuitAdversary(AcceptanceGuesser):
    name = "wrong-circuit"
    description = "Evaluates the circuit but claims it followed by an extra X"

    def evaluate(self, view: AdversaryView, ct: Any, circuit, rng: RngStream, memo: Any) -> Evaluated:
        evaluated = view.scheme.evaluate(view.evk, ct, circuit, rng)
        extra = Gate(kind=GateKind.X, wires=(self.target_wire(evaluated),))
        evaluated.circuit = circuit.with_gates((*circuit.gates, extra))
        evaluated.tampered = True
        return evaluated


class MacForgeryAdversary(AcceptanceGuesser):
    """
    Replaces the tag of the first signed record with random bytes.

    The log entry carrying the record gets a fresh digest, so only the MAC
    check can catch it. A ciphertext evaluated under the empty circuit has
    no log; its own first pad record is forged instead.
    """

    name = "mac-forgery"
    description = "Random tag on the first signed record, digest recomputed"
    requires_log = True

    def evaluate(self, view: AdversaryView, ct: Any, circuit, rng: RngStream, memo: Any) -> Evaluated:
        evaluated = view.scheme.evaluate(view.evk, ct, circuit, rng)
        forged = rng.bytes(MAC_TAG_BYTES)
        log = ComputationLog.from_text(evaluated.log)
        entries = log.entries
        for k, entry in enumerate(entries):
            if entry.kind is LogEntryKind.ENC and "tag" in entry.payload:
                changed = entry.model_copy(update={"payload": {**entry.payload, "tag": forged.hex()}})
                outputs = record_outputs(entry.function_id, bytes.fromhex(entry.payload["message"]))
                entries[k] = changed.model_copy(update={"digest": changed.compute_digest(outputs)})
                evaluated.log = ComputationLog(entries).to_text()
                evaluated.tampered = True
                return evaluated
        if isinstance(evaluated.ct, VqfheCiphertext) and evaluated.ct.pads:
            label = sorted(evaluated.ct.pads)[0]
            record: SignedMessage = evaluated.ct.pads[label]
            evaluated.ct.pads[label] = record.with_tag(forged)
            evaluated.tampered = True
            return evaluated
        raise AdversaryContractError("nothing signed to forge")


class AdaptiveTwoRoundAdversary(Adversary):
    """Picks its second-round plaintext from the classical part of the first-round ciphertext."""

    name = "adaptive-two-round"
    description = "Second-round input |b>, b read off the round-one ciphertext; honest evaluation"

    def choose_second(
        self, view: AdversaryView, first: Any, n_wires: int, rng: RngStream, memo: Any
    ) -> tuple[StateVector, Any]:
        b = sum(view.scheme.public_bytes(first)) & 1
        return qsim.new_register(n_wires, ("1" if b else "0") * n_wires), memo


AdversaryFactory = Callable[[], Adversary]

_REGISTRY: dict[str, AdversaryFactory] = {
    cls.name: cls
    for cls in (
        Adversary,
        GuessZeroAdversary,
        SinglePauliAdversary,
        FixedWeightAdversary,
        LogTamperAdversary,
        WrongCircuitAdversary,
        MacForgeryAdversary,
        AdaptiveTwoRoundAdversary,
    )
}


def builtin_adversaries() -> dict[str, AdversaryFactory]:
    """Name -> factory of every built-in adversary."""
    return dict(_REGISTRY)


def get_adversary(name: str, **kwargs: Any) -> Adversary:
    if name not in _REGISTRY:
        raise AdversaryContractError(f"unknown adversary {name!r}; choose one of {sorted(_REGISTRY)}")
    return _REGISTRY[name](**kwargs)
