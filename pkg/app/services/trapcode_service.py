"""
Trap-code scheme: keying, encryption, transversal evaluation, key updates and
verified decryption for circuits over Paulis, CNOT and measurements.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.stats import hypergeom

from app.exceptions import CircuitError, DimensionError, SlotError
from app.models.circuit import CircuitDesc, Gate, GateKind
from app.models.quantum import Basis
from app.models.trap import MeasurementCheck, TrapKey, TrapRecord, VerDecResult, as_bits
from app.services.block_register import BlockRegister, TrapBlock, logical_mask, unpermute_bits
from app.services.css_code import CssCode, SyndromeReport, get_code
from app.services.rng_service import RngStream
from app.services.statevector import OperationCounter, StateVector, qsim

logger = logging.getLogger("app.trapcode")

TC_KINDS = frozenset({GateKind.X, GateKind.Z, GateKind.CNOT, GateKind.MEAS})


def code_for_size(size: int) -> CssCode:
    """Code whose trap blocks have ``size`` = 3m positions."""
    if size % 3:
        raise DimensionError(f"block size {size} is not a multiple of 3")
    m, level = size // 3, 0
    while m > 1 and m % 7 == 0:
        m //= 7
        level += 1
    if m != 1 or level < 1:
        raise DimensionError(f"block size {size} does not belong to a concatenated Steane code")
    return get_code(level)


def cnot_key_update(xi, zi, xj, zj) -> tuple:
    """(x_i, z_i)(x_j, z_j) -> (x_i, z_i ^ z_j)(x_i ^ x_j, z_j); works on bits or bit arrays."""
    return xi, zi ^ zj, xi ^ xj, zj


def check_record(code: CssCode, pi, x, z, record, basis: Basis) -> MeasurementCheck:
    """
    Interpret a measured block.

    Z basis: undo the X pad, check the |0> traps. X basis: undo the Z pad,
    check the |+> traps. Only one trap family is checked per basis.
    """
    m = code.m
    basis = Basis(basis)
    pad = x if basis is Basis.Z else z
    w = unpermute_bits(as_bits(record, 3 * m) ^ as_bits(pad, 3 * m), np.asarray(pi))
    traps = w[m : 2 * m] if basis is Basis.Z else w[2 * m :]
    if np.any(traps):
        family = "zero-trap" if basis is Basis.Z else "plus-trap"
        return MeasurementCheck(bit=0, accepted=False, reason=f"{family} triggered in measured block")
    return MeasurementCheck(bit=code.classical_decode(w[:m]), accepted=True)


@dataclass(frozen=True)
class KeyUpdateRule:
    """Key transformation induced by one gate of the circuit."""

    tag: GateKind
    operands: tuple[int, ...]
    condition: Optional[int] = None
    basis: Optional[Basis] = None

    @classmethod
    def from_gate(cls, gate: Gate) -> "KeyUpdateRule":
        if gate.kind not in TC_KINDS:
            raise CircuitError(f"no trap-code key update for gate {gate.kind.value}")
        return cls(tag=gate.kind, operands=gate.wires, condition=gate.condition, basis=gate.basis)

    def applies(self, bits: dict[int, int]) -> bool:
        if self.condition is None:
            return True
        if self.condition not in bits:
            raise CircuitError(f"rule {self.tag.value} {self.operands} is controlled by unknown outcome {self.condition}")
        return bool(bits[self.condition])

    def apply(self, x: list[np.ndarray], z: list[np.ndarray], mask: np.ndarray, bits: dict[int, int]) -> None:
        """Update the pad lists in place."""
        if self.tag is GateKind.MEAS or not self.applies(bits):
            return
        if self.tag is GateKind.X:
            x[self.operands[0]] = x[self.operands[0]] ^ mask
        elif self.tag is GateKind.Z:
            z[self.operands[0]] = z[self.operands[0]] ^ mask
        else:
            i, j = self.operands
            x[i], z[i], x[j], z[j] = cnot_key_update(x[i], z[i], x[j], z[j])


@dataclass
class TrapCiphertext:
    """Trap blocks by slot; measured blocks keep their record."""

    register: BlockRegister
    slots: dict[int, int] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.slots)

    def block(self, slot: int) -> TrapBlock:
        if slot not in self.slots:
            raise SlotError(f"ciphertext has no slot {slot}")
        return self.register.block(self.slots[slot])

    def records(self) -> dict[int, TrapRecord]:
        out = {}
        for slot in sorted(self.slots):
            blk = self.block(slot)
            if blk.measured:
                out[slot] = TrapRecord(bits=blk.record.copy(), basis=blk.record_basis)
        return out


class TrapCodeService:
    """TC.KeyGen / Enc / Eval / VerDec."""

    def __init__(self):
        self.logger = logger

    def keygen(self, n: int, code: CssCode, rng: RngStream) -> TrapKey:
        """
        Sample a trap-code key.

        Args:
            n: Number of slots (0 allowed)
            code: CSS code fixing the block size 3m
            rng: Key randomness

        Returns:
            Uniform permutation of 3m positions and uniform pads per slot
        """
        if n < 0:
            raise DimensionError("slot count must be non-negative")
        size = 3 * code.m
        pi = rng.permutation(size)
        x = tuple(rng.bits(size) for _ in range(n))
        z = tuple(rng.bits(size) for _ in range(n))
        return TrapKey(pi, x, z)

    def new_ciphertext(self, code: CssCode) -> TrapCiphertext:
        return TrapCiphertext(register=BlockRegister(code))

    def enc(self, key: TrapKey, logical: StateVector, slot: int, ct: Optional[TrapCiphertext] = None) -> TrapCiphertext:
        """Encrypt a single-qubit state into ``slot`` of ``ct`` (a new ciphertext when omitted)."""
        if logical.n_qubits != 1:
            raise DimensionError("enc encrypts one logical qubit; use encrypt for registers")
        if not 0 <= slot < key.n:
            raise SlotError(f"key has no pads for slot {slot}")
        ct = ct or self.new_ciphertext(code_for_size(key.size))
        if slot in ct.slots:
            raise SlotError(f"slot {slot} is already in use")
        (block_id,) = ct.register.add_state(logical, key.pi, [(key.x[slot], key.z[slot])], [str(slot)])
        ct.slots[slot] = block_id
        return ct

    def encrypt(self, key: TrapKey, state: StateVector) -> TrapCiphertext:
        """Encrypt an n-qubit (possibly entangled) register slot by slot."""
        if state.n_qubits != key.n:
            raise DimensionError(f"key has {key.n} slots, state has {state.n_qubits} qubits")
        return self.encrypt_into(key, state, 0)

    def encrypt_into(
        self, key: TrapKey, state: StateVector, offset: int, ct: Optional[TrapCiphertext] = None
    ) -> TrapCiphertext:
        """Encrypt a register into slots ``offset .. offset + n - 1``, leaving other slots for later rounds."""
        if offset < 0 or offset + state.n_qubits > key.n:
            raise SlotError(f"slots {offset}..{offset + state.n_qubits - 1} are outside the key's {key.n} slots")
        ct = ct or self.new_ciphertext(code_for_size(key.size))
        slots = list(range(offset, offset + state.n_qubits))
        if any(s in ct.slots for s in slots):
            raise SlotError(f"slots {slots} overlap slots already in use")
        pads = [(key.x[s], key.z[s]) for s in slots]
        block_ids = ct.register.add_state(state, key.pi, pads, [str(s) for s in slots])
        ct.slots.update(zip(slots, block_ids))
        return ct

    def combine(self, first: TrapCiphertext, second: TrapCiphertext) -> TrapCiphertext:
        """Join two ciphertexts under the same key with disjoint slots."""
        if set(first.slots) & set(second.slots):
            raise SlotError("ciphertexts share slots")
        first.register.merge(second.register)
        first.slots.update(second.slots)
        return first

    # evaluation

    def eval_cnot(self, ct: TrapCiphertext, i: int, j: int) -> TrapCiphertext:
        ct.register.transversal_cnot(ct.block(i).block_id, ct.block(j).block_id)
        return ct

    def eval_measure(self, ct: TrapCiphertext, slot: int, basis: Basis, rng: RngStream) -> TrapCiphertext:
        ct.register.measure_block(ct.block(slot).block_id, Basis(basis), rng)
        return ct

    def eval_circuit(self, ct: TrapCiphertext, circuit: CircuitDesc, rng: RngStream) -> TrapCiphertext:
        """Honest evaluation: Paulis are left to the key update, CNOT and MEAS act transversally."""
        for gate in circuit.gates:
            if gate.kind not in TC_KINDS:
                raise CircuitError(f"trap code cannot evaluate {gate.kind.value}")
            if gate.kind is GateKind.CNOT:
                self.eval_cnot(ct, *gate.wires)
            elif gate.kind is GateKind.MEAS:
                self.eval_measure(ct, gate.wire, gate.basis, rng)
        return ct

    def apply_attack(self, ct: TrapCiphertext, slot: int, x_bits=None, z_bits=None) -> None:
        ct.register.apply_physical_pauli(ct.block(slot).block_id, x_bits, z_bits)

    def materialize(self, ct: TrapCiphertext, slot: int) -> StateVector:
        return ct.register.materialize(ct.block(slot).block_id)

    # key updates

    def rules_for(self, circuit: CircuitDesc) -> list[KeyUpdateRule]:
        return [KeyUpdateRule.from_gate(g) for g in circuit.gates]

    def key_update(self, rules: Iterable[KeyUpdateRule], key: TrapKey, bits: Optional[dict[int, int]] = None) -> TrapKey:
        """Apply a rule stream to a key; conditional rules read ``bits``."""
        bits = bits or {}
        x, z = list(key.x), list(key.z)
        mask = logical_mask(key.pi, key.size // 3)
        for rule in rules:
            if any(not 0 <= w < key.n for w in rule.operands):
                raise CircuitError(f"rule {rule.tag.value} {rule.operands} references a slot outside the key")
            rule.apply(x, z, mask, bits)
        return key.with_pads(x, z)

    # verified decryption

    def verdec_measurement(self, key: TrapKey, slot: int, record, basis: Basis) -> MeasurementCheck:
        return check_record(code_for_size(key.size), key.pi, key.x[slot], key.z[slot], record, basis)

    def verdec_qubit(
        self, key: TrapKey, ct: TrapCiphertext, slot: int, rng: Optional[RngStream] = None
    ) -> tuple[StateVector, bool]:
        """
        Check both trap families of one unmeasured block and decode it.

        Returns:
            (logical state, True) or (|0>, False)
        """
        blk = ct.block(slot)
        opened = ct.register.open_block(blk.block_id, key.x[slot], key.z[slot])
        state = ct.register.extract([blk.block_id], rng)
        if not opened.accepted:
            self.logger.info(f"Block rejected slot={slot} reason={opened.reason}")
            return qsim.new_register(1), False
        return state, True

    def verdec_physical(
        self, key: TrapKey, slot: int, state: StateVector, rng: RngStream
    ) -> tuple[StateVector, bool, Optional[SyndromeReport]]:
        """
        Verified decryption of an explicit 3m-qubit block.

        Undo the pad, unpermute, measure the |0> traps in Z and the |+> traps
        in X, then CSS-decode the data qubits.
        """
        code = code_for_size(key.size)
        m = code.m
        if state.n_qubits != 3 * m:
            raise DimensionError(f"physical block must have {3 * m} qubits")
        s = qsim.apply_pauli_string(state, key.x[slot], key.z[slot])
        s = qsim.permute_qubits(s, np.argsort(key.pi))
        accepted = True
        for q in range(m, 3 * m):
            outcome, s = qsim.measure(s, q, Basis.Z if q < 2 * m else Basis.X, rng)
            accepted = accepted and outcome.bit == 0
        for q in range(3 * m - 1, m - 1, -1):
            s = qsim.discard_qubit(s, q)
        if not accepted:
            return qsim.new_register(1), False, None
        logical, report = code.decode(s, rng)
        return logical, report.correctable, report

    def verdec(self, key: TrapKey, ct: TrapCiphertext, circuit: CircuitDesc, rng: Optional[RngStream] = None) -> VerDecResult:
        """
        Verified decryption of an evaluated ciphertext against circuit ``circuit``.

        Args:
            key: Key used at encryption
            ct: Returned ciphertext (possibly tampered with)
            circuit: Circuit the evaluator claims to have applied
            rng: Needed to trace out non-output wires that are entangled with outputs

        Returns:
            Outputs and acc, or the reject output with the reason
        """
        if circuit.n_wires > ct.n or circuit.n_wires > key.n:
            raise CircuitError(f"circuit uses {circuit.n_wires} wires, ciphertext has {ct.n} slots")
        rules = self.rules_for(circuit)
        code = code_for_size(key.size)
        mask = logical_mask(key.pi, code.m)
        x, z = list(key.x), list(key.z)
        bits: dict[int, int] = {}
        steps = 0
        with OperationCounter() as ops:
            for rule in rules:
                steps += 1
                if rule.tag is not GateKind.MEAS:
                    rule.apply(x, z, mask, bits)
                    continue
                wire = rule.operands[0]
                blk = ct.block(wire)
                if not blk.measured:
                    return self._reject(circuit, f"wire {wire} was never measured", steps, ops)
                if blk.record_basis is not rule.basis:
                    return self._reject(circuit, f"wire {wire} measured in the wrong basis", steps, ops)
                steps += 1
                check = check_record(code, key.pi, x[wire], z[wire], blk.record, rule.basis)
                if not check.accepted:
                    return self._reject(circuit, f"wire {wire}: {check.reason}", steps, ops)
                bits[wire] = check.bit
            measured = set(circuit.measured_wires)
            for slot in range(circuit.n_wires):
                blk = ct.block(slot)
                if blk.measured and slot not in measured:
                    return self._reject(circuit, f"wire {slot} was measured but the circuit keeps it quantum", steps, ops)
            for slot in range(circuit.n_wires):
                if slot in measured:
                    continue
                steps += 1
                opened = ct.register.open_block(ct.block(slot).block_id, x[slot], z[slot])
                if not opened.accepted:
                    return self._reject(circuit, opened.reason, steps, ops)
            quantum = circuit.quantum_outputs
            dropped = [s for s in range(circuit.n_wires) if s not in measured and s not in quantum]
            state = ct.register.extract([ct.block(s).block_id for s in quantum], rng)
            for s in dropped:
                ct.register.discard_block(ct.block(s).block_id, rng)
        self.logger.debug(f"Verified decryption accepted wires={circuit.n_wires} steps={steps}")
        return VerDecResult(
            accepted=True,
            state=state,
            bits={w: bits[w] for w in circuit.classical_outputs},
            quantum_wires=quantum,
            ver_steps=steps,
            dec_operations=steps + ops.total,
        )

    def _reject(self, circuit: CircuitDesc, reason: str, steps: int, ops: OperationCounter) -> VerDecResult:
        self.logger.info(f"Verified decryption rejected reason={reason}")
        return reject_output(circuit, reason, steps, steps + ops.total)

    # detection statistics

    def detection_oracle(self, m: int, w: int) -> float:
        """Exact probability that w distinct X errors on a 3m block miss all m |0> traps."""
        if not 0 <= w <= 3 * m:
            raise DimensionError(f"weight {w} does not fit a block of {3 * m} positions")
        return float(hypergeom(3 * m, m, w).pmf(0))

    def acceptance_bound(self, w: int) -> float:
        """(2/3)^ceil(w/2), the upper bound on accepting w X errors."""
        return (2 / 3) ** math.ceil(w / 2)


def reject_output(circuit: CircuitDesc, reason: str, ver_steps: int = 0, dec_operations: int = 0) -> VerDecResult:
    """Omega: |0...0> on the quantum outputs and zero bits on the classical ones."""
    quantum = circuit.quantum_outputs
    return VerDecResult(
        accepted=False,
        state=qsim.new_register(len(quantum)),
        bits={w: 0 for w in circuit.classical_outputs},
        quantum_wires=quantum,
        ver_steps=ver_steps,
        dec_operations=dec_operations,
        reason=reason,
    )


def random_positions(rng: RngStream, size: int, weight: int) -> Sequence[int]:
    """``weight`` distinct positions of a block."""
    return [int(p) for p in rng.choice(size, weight)]


# Global instance
trapcode_service = TrapCodeService()
