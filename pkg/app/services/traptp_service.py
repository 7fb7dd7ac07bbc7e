"""
TrapTP: verifiable quantum homomorphic encryption over the trap code.

KeyGen prepares magic states and garden-hose gadgets, Enc trap-encodes the
input with fresh pads, Eval runs the claimed circuit gate by gate while
logging every classical step, and VerDec splits into a classical Ver (MAC
checks, claims, log replay, final keys, measurement flags) and a quantum
Dec (trap checks and key removal on the output blocks only).
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from app.exceptions import CircuitError, SlotError, TrapTPError
from app.models.circuit import CircuitDesc, GateKind
from app.models.crypto import HeCiphertext, SignedMessage
from app.models.log import ComputationLog
from app.models.quantum import Basis
from app.models.trap import VerDecResult
from app.models.traptp import (
    EvalKey,
    SchemeParams,
    SchemeVariant,
    SecretKey,
    SideChannel,
    VqfheCiphertext,
    pad_label,
    record_outputs,
)
from app.services.block_register import BlockRegister
from app.services.css_code import get_code
from app.services.evaluation_session import EvaluationSession
from app.services.gardenhose_service import GardenHoseService
from app.services.he_functions import decode_bits, encode_bits, encode_perm
from app.services.he_service import HomomorphicService, homomorphic_service
from app.services.log_service import LogCheck, LogVerifier
from app.services.mac_service import mac_service
from app.services.macro_expansion import Claim, expand_circuit, h_blocks, p_block, t_block
from app.services.record_service import RecordService
from app.services.rng_service import RngStream
from app.services.statevector import OperationCounter, StateVector, qsim
from app.services.trapcode_service import reject_output

logger = logging.getLogger("app.traptp")


@dataclass
class Verification:
    """Outcome of the classical Ver phase."""

    accepted: bool
    reason: str = ""
    steps: int = 0
    pads: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    blocks: dict[int, str] = field(default_factory=dict)
    bits: dict[int, int] = field(default_factory=dict)


class TrapTPService:
    """KeyGen / Enc / Eval / Ver / Dec of the verifiable scheme."""

    def __init__(self, he: Optional[HomomorphicService] = None):
        self.he = he or homomorphic_service
        self.records = RecordService(self.he)
        self.gardenhose = GardenHoseService(self.he)
        self.verifier = LogVerifier(self.he)
        self.logger = logger

    # key generation and encryption

    def keygen(
        self, params: SchemeParams, rng: RngStream, side: Optional[SideChannel] = None
    ) -> tuple[SecretKey, EvalKey]:
        """
        Generate the secret key and the quantum evaluation key.

        Args:
            params: Code level and (t, p, h) budgets
            rng: Key randomness
            side: Receives plaintext copies of every signed record (hybrid variants)

        Returns:
            (sk, evk) with p P-states, h H-states, t T-states and t gadgets, numbered from 1
        """
        code = get_code(params.level)
        size = 3 * code.m
        pi = rng.permutation(size)
        mac_key = mac_service.keygen(rng)
        he_keys = self.he.keygen(params.t, rng)
        sk = SecretKey(params=params, pi=pi, mac_key=mac_key, he_keys=he_keys)
        keys = self.records.seal_keys(encode_perm(pi), he_keys.public(), mac_key, rng, side)
        evk = EvalKey(params=params, keys=keys, register=BlockRegister(code))
        plus = qsim.new_register(1, "+")
        for k in range(1, params.p + 1):
            self._add_resource(sk, evk, [p_block(k)], qsim.apply_gate(plus, "P", 0), rng, side)
        for k in range(1, params.h + 1):
            _, _, pair = qsim.make_epr()
            self._add_resource(sk, evk, list(h_blocks(k)), qsim.apply_gate(pair, "H", 0), rng, side)
        for i in range(1, params.t + 1):
            self._add_resource(sk, evk, [t_block(i)], qsim.apply_gate(plus, "T", 0), rng, side)
            gadget = self.gardenhose.gadget_gen(evk.register, i, pi, he_keys, mac_key, rng, side)
            evk.blocks.update(gadget.blocks)
            evk.pads.update(gadget.pads)
            evk.gadgets[i] = gadget.record
        self.logger.debug(f"Keys generated level={params.level} t={params.t} p={params.p} h={params.h}")
        return sk, evk

    def _add_resource(
        self, sk: SecretKey, evk: EvalKey, names: list[str], state: StateVector, rng: RngStream, side: Optional[SideChannel]
    ) -> None:
        size = len(sk.pi)
        for name, handle in zip(names, evk.register.workspace.add(state)):
            x, z = rng.bits(size), rng.bits(size)
            evk.blocks[name] = evk.register.add_block(handle, sk.pi, x, z, label=name)
            evk.pads[pad_label(name)] = self.records.seal(
                pad_label(name), [encode_bits(x), encode_bits(z)], sk.pk0, sk.mac_key, rng, side
            )

    def enc(
        self, sk: SecretKey, state: StateVector, rng: RngStream, side: Optional[SideChannel] = None, offset: int = 0
    ) -> VqfheCiphertext:
        """
        Trap-encode every qubit under pi with fresh pads and attach the signed encrypted pads.

        Qubit j becomes wire ``offset + j``; a second encryption under the same key uses a disjoint offset.
        """
        size = len(sk.pi)
        register = BlockRegister(get_code(sk.params.level))
        names = [str(offset + w) for w in range(state.n_qubits)]
        pads = [(rng.bits(size), rng.bits(size)) for _ in names]
        ids = register.add_state(state, sk.pi, pads, labels=names)
        records = {
            name: self.records.seal(pad_label(name), [encode_bits(x), encode_bits(z)], sk.pk0, sk.mac_key, rng, side)
            for name, (x, z) in zip(names, pads)
        }
        return VqfheCiphertext(
            register=register,
            wires={offset + w: name for w, name in enumerate(names)},
            blocks=dict(zip(names, ids)),
            pads={pad_label(name): record for name, record in records.items()},
        )

    def combine(self, first: VqfheCiphertext, second: VqfheCiphertext) -> VqfheCiphertext:
        """Join two fresh ciphertexts produced under one key with disjoint wire offsets."""
        if first.evaluated or second.evaluated:
            raise SlotError("only fresh ciphertexts can be combined")
        if set(first.wires) & set(second.wires):
            raise SlotError(f"ciphertexts share wires {sorted(set(first.wires) & set(second.wires))}")
        first.register.merge(second.register)
        return VqfheCiphertext(
            register=first.register,
            wires={**first.wires, **second.wires},
            blocks={**first.blocks, **second.blocks},
            pads={**first.pads, **second.pads},
        )

    def decrypt_resource(self, sk: SecretKey, evk: EvalKey, names: list[str], rng: RngStream) -> StateVector:
        """Open key resources directly with sk (inspection of freshly generated keys)."""
        ids = []
        for name in names:
            x_ct, z_ct = record_outputs(pad_label(name), evk.pads[pad_label(name)].message)
            x = decode_bits(self.he.dec(sk.he_keys.pair(x_ct.epoch), x_ct))
            z = decode_bits(self.he.dec(sk.he_keys.pair(z_ct.epoch), z_ct))
            block_id = evk.blocks[name]
            result = evk.register.open_block(block_id, x, z)
            if not result.accepted:
                raise TrapTPError(f"resource {name} failed its trap check: {result.reason}")
            ids.append(block_id)
        return evk.register.extract(ids, rng)

    # evaluation

    def new_session(self, evk: EvalKey, ct: VqfheCiphertext, rng: RngStream) -> EvaluationSession:
        return EvaluationSession(evk, ct, rng, self.he)

    def eval_x(self, session: EvaluationSession, block: str) -> None:
        session.pauli("X", block)

    def eval_z(self, session: EvaluationSession, block: str) -> None:
        session.pauli("Z", block)

    def eval_cond_x(self, session: EvaluationSession, block: str, condition: str) -> None:
        session.pauli("X", block, condition)

    def eval_cond_z(self, session: EvaluationSession, block: str, condition: str) -> None:
        session.pauli("Z", block, condition)

    def eval_cnot(self, session: EvaluationSession, control: str, target: str) -> None:
        session.cnot(control, target)

    def eval_measure(self, session: EvaluationSession, block: str, basis: Basis) -> HeCiphertext:
        return session.measure(block, basis).ct

    def eval_p(self, session: EvaluationSession, claims: list[Claim]) -> None:
        self._run_macro(session, claims, "mP")

    def eval_h(self, session: EvaluationSession, claims: list[Claim]) -> None:
        self._run_macro(session, claims, "mH")

    def eval_t(self, session: EvaluationSession, claims: list[Claim]) -> None:
        """T through one magic state, a bulk recryption and a conditional P through the next gadget."""
        self._run_macro(session, claims, "mT")

    def _run_macro(self, session: EvaluationSession, claims: list[Claim], resource: str) -> None:
        if not claims or not claims[0].blocks or not any(b.startswith(resource) for b in claims[0].blocks):
            raise CircuitError(f"claims do not describe a {resource} gadget")
        for claim in claims:
            self._execute(session, claim)

    def _execute(self, session: EvaluationSession, claim: Claim) -> None:
        session.claim(claim)
        if claim.op == "CNOT":
            self.eval_cnot(session, *claim.blocks)
        elif claim.op == "MEAS":
            self.eval_measure(session, claim.blocks[0], claim.basis)
        elif claim.op == "X":
            session.pauli("X", claim.blocks[0], claim.condition)
        elif claim.op == "Z":
            session.pauli("Z", claim.blocks[0], claim.condition)
        elif claim.op == "RECRYPT":
            session.recrypt_all(claim.gadget, exclude=claim.condition)
        elif claim.op == "CONDP":
            self.gardenhose.eval_cond_p(session, claim.blocks[0], claim.gadget, claim.condition)
        else:
            raise CircuitError(f"unknown claim {claim.text!r}")

    def eval_circuit(
        self, evk: EvalKey, ct: VqfheCiphertext, circuit: CircuitDesc, rng: RngStream
    ) -> tuple[VqfheCiphertext, ComputationLog]:
        """
        Evaluate a circuit homomorphically.

        Args:
            evk: Evaluation key (consumed)
            ct: Fresh ciphertext with one block per circuit wire
            circuit: Circuit within the key's (t, p, h) budgets
            rng: Measurement and nonce randomness

        Returns:
            Evaluated ciphertext with its claimed final keys, and the computation log
        """
        if circuit.n_wires != ct.n_wires:
            raise CircuitError(f"circuit has {circuit.n_wires} wires, ciphertext holds {ct.n_wires}")
        expansion = expand_circuit(circuit, evk.params.budgets)
        if not circuit.gates:
            return ct, ComputationLog()
        session = self.new_session(evk, ct, rng)
        handlers = {
            GateKind.P: self.eval_p,
            GateKind.H: self.eval_h,
            GateKind.T: self.eval_t,
        }
        for kind, claims in expansion.groups:
            if kind in handlers:
                handlers[kind](session, claims)
            else:
                for claim in claims:
                    self._execute(session, claim)
        outputs = {w: expansion.final_blocks[w] for w in circuit.quantum_outputs}
        final = session.finish(outputs)
        result = VqfheCiphertext(
            register=session.register,
            wires=outputs,
            blocks={name: session.block_id(name) for name in outputs.values()},
            final_pads={w: (x.ct, z.ct) for w, (x, z) in final.items()},
            epoch=session.epoch,
        )
        self.logger.debug(f"Circuit evaluated gates={len(circuit)} entries={len(session.log)} epoch={session.epoch}")
        return result, session.log

    # verification

    def _signed_check(self, sk: SecretKey, variant: SchemeVariant, side: Optional[SideChannel]):
        if variant is SchemeVariant.TRAPTP:
            key = sk.mac_key
            return lambda label, message, tag: mac_service.verify(key, SignedMessage(label=label, message=message, tag=tag))
        signed = side.signed if side is not None else {}
        return lambda label, message, tag: signed.get(label) == message

    def ver(
        self,
        sk: SecretKey,
        ct: VqfheCiphertext,
        log: Union[str, ComputationLog],
        circuit: CircuitDesc,
        variant: SchemeVariant = SchemeVariant.TRAPTP,
        side: Optional[SideChannel] = None,
    ) -> Verification:
        """
        Classical verification: signed records, claims, log replay, final keys and measurement flags.

        Returns:
            Verification carrying the decrypted final pads of the quantum outputs and the classical output bits
        """
        variant = SchemeVariant(variant)
        if variant is not SchemeVariant.TRAPTP and side is None:
            return self._failed(Verification(False), f"variant {variant.value} needs the side channel")
        signed_check = self._signed_check(sk, variant, side)
        plain = variant is SchemeVariant.DOUBLE_PRIME
        plain_source = side.plaintexts.get if plain and side is not None else None
        check = self.verifier.check_log(
            log, circuit, sk.he_keys, signed_check, plain_source, sk.params.budgets, sk.params.level
        )
        result = Verification(accepted=check.accepted, reason=check.reason, steps=check.steps)
        if not check.accepted:
            return result
        try:
            if check.final is None:
                self._fresh_keys(sk, ct, circuit, signed_check, side if plain else None, result)
            else:
                self._final_keys(sk, ct, circuit, check, plain, result)
            for w in circuit.classical_outputs:
                ref = check.outcome_ref(check.expansion.measured[w])
                if ref is None:
                    return self._failed(result, f"no checked outcome for wire {w}")
                result.steps += 1
                result.bits[w] = self.verifier.read(check, ref, sk.he_keys, plain)
        except (TrapTPError, KeyError, ValueError) as e:
            return self._failed(result, f"final keys unreadable: {e}")
        return result

    def _failed(self, result: Verification, reason: str) -> Verification:
        result.accepted = False
        result.reason = reason
        self.logger.info(f"Verification rejected reason={reason!r}")
        return result

    def _fresh_keys(self, sk, ct, circuit, signed_check, side, result: Verification) -> None:
        """Keys of an unevaluated ciphertext: its own signed pad records."""
        for w in circuit.quantum_outputs:
            name = str(w)
            record = ct.pads.get(pad_label(name))
            result.steps += 1
            if ct.wires.get(w) != name or record is None or not signed_check(record.label, record.message, record.tag):
                raise TrapTPError(f"pad record of wire {w} is missing or not authentic")
            if side is not None:
                x_plain, z_plain = side.plaintexts[record.label]
            else:
                x_ct, z_ct = record_outputs(record.label, record.message)
                x_plain = self.he.dec(sk.he_keys.pair(x_ct.epoch), x_ct)
                z_plain = self.he.dec(sk.he_keys.pair(z_ct.epoch), z_ct)
            result.pads[w] = (decode_bits(x_plain), decode_bits(z_plain))
            result.blocks[w] = name

    def _final_keys(self, sk, ct, circuit, check: LogCheck, plain: bool, result: Verification) -> None:
        """Claimed final keys must be exactly the replayed ciphertexts the log names."""
        wires = sorted(circuit.quantum_outputs)
        names = [check.expansion.final_blocks[w] for w in wires]
        final = check.final
        if final.payload["wires"] != names or len(final.inputs) != 2 * len(wires):
            raise TrapTPError("final keys do not name the circuit's output blocks")
        for k, (w, name) in enumerate(zip(wires, names)):
            x_ref, z_ref = final.inputs[2 * k], final.inputs[2 * k + 1]
            claimed = ct.final_pads.get(w)
            result.steps += 1
            if ct.wires.get(w) != name or claimed is None:
                raise TrapTPError(f"ciphertext carries no final keys for wire {w}")
            x_logged, z_logged = check.table[x_ref], check.table[z_ref]
            if claimed[0].to_bytes() != x_logged.to_bytes() or claimed[1].to_bytes() != z_logged.to_bytes():
                raise TrapTPError(f"final keys of wire {w} differ from the log")
            if plain:
                x_plain, z_plain = check.plaintexts[x_ref], check.plaintexts[z_ref]
            else:
                x_plain = self.he.dec(sk.he_keys.pair(claimed[0].epoch), claimed[0])
                z_plain = self.he.dec(sk.he_keys.pair(claimed[1].epoch), claimed[1])
            result.pads[w] = (decode_bits(x_plain), decode_bits(z_plain))
            result.blocks[w] = name

    def dec(
        self, sk: SecretKey, ct: VqfheCiphertext, verification: Verification, circuit: CircuitDesc, rng: RngStream
    ) -> VerDecResult:
        """
        Quantum decryption of verified output blocks.

        Its simulator-call count depends only on the number of quantum outputs.
        """
        if not verification.accepted:
            return reject_output(circuit, verification.reason, verification.steps)
        quantum = circuit.quantum_outputs
        with OperationCounter() as ops:
            try:
                ids = []
                for w in quantum:
                    block_id = ct.blocks[verification.blocks[w]]
                    if not np.array_equal(ct.register.block(block_id).perm, sk.pi):
                        reason = f"wire {w} is not under the key permutation"
                        return reject_output(circuit, reason, verification.steps, ops.total)
                    x, z = verification.pads[w]
                    opened = ct.register.open_block(block_id, x, z)
                    if not opened.accepted:
                        self.logger.info(f"Trap check failed wire={w} reason={opened.reason!r}")
                        return reject_output(circuit, opened.reason, verification.steps, ops.total)
                    ids.append(block_id)
                state = ct.register.extract(ids, rng)
            except (TrapTPError, KeyError) as e:
                return reject_output(circuit, f"ciphertext unusable: {e}", verification.steps, ops.total)
        return VerDecResult(
            accepted=True,
            state=state,
            bits=dict(verification.bits),
            quantum_wires=quantum,
            ver_steps=verification.steps,
            dec_operations=ops.total,
        )

    def verdec(
        self,
        sk: SecretKey,
        ct: VqfheCiphertext,
        log: Union[str, ComputationLog],
        circuit: CircuitDesc,
        rng: RngStream,
        variant: SchemeVariant = SchemeVariant.TRAPTP,
        side: Optional[SideChannel] = None,
    ) -> VerDecResult:
        """Ver followed by Dec; any failure yields Omega with the reject flag."""
        verification = self.ver(sk, ct, log, circuit, variant, side)
        result = self.dec(sk, ct, verification, circuit, rng)
        if result.accepted:
            self.logger.debug(f"Verified decryption accepted steps={result.ver_steps} ops={result.dec_operations}")
        return result


# Global instance
traptp_service = TrapTPService()
