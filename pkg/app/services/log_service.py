"""
Computation-log verification.

The verifier parses the log strictly, checks that its gate claims are the
canonical expansion of the declared circuit, then replays every entry: it
re-encrypts recorded values with the logged nonces, re-evaluates every
function and recryption, and compares each recomputed digest with the
logged one. Epochs may only advance one at a time and only after the
matching number of RECRYPT claims. Finally the replayed values are bound to
the circuit: every evaluation, measurement and final key must be the one the
claims call for, and every measurement flag must decrypt to accept.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from app.exceptions import LogFormatError, TrapTPError
from app.models.circuit import CircuitDesc
from app.models.crypto import HeCiphertext, HeKeySet
from app.models.log import ComputationLog, LogEntry, LogEntryKind
from app.models.quantum import Basis
from app.models.traptp import gadget_label, record_outputs
from app.services.dataflow import Dataflow, DataflowTracer, Term, TermTable
from app.services.he_functions import apply_function, decode_bit, decode_bits
from app.services.he_service import HomomorphicService, homomorphic_service
from app.services.macro_expansion import Expansion, expand_circuit

logger = logging.getLogger("app.log")

SignedCheck = Callable[[str, bytes, bytes], bool]
PlainSource = Callable[[str], Optional[tuple[bytes, ...]]]


class _Payload(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True)


class SignedEncPayload(_Payload):
    message: str = Field(pattern=r"^(?:[0-9a-f]{2})*$")
    tag: str = Field(pattern=r"^(?:[0-9a-f]{2})+$")


class PlainEncPayload(_Payload):
    epoch: int = Field(ge=0)
    nonce: int = Field(ge=0, lt=2**64)
    plaintext: str = Field(pattern=r"^(?:[0-9a-f]{2})*$")


class EvalPayload(_Payload):
    epoch: int = Field(ge=0)
    nonces: list[int]


class RecryptPayload(_Payload):
    epoch: int = Field(ge=1)
    nonce: int = Field(ge=0, lt=2**64)


class MeasurementPayload(_Payload):
    basis: str = Field(pattern=r"^[ZX]$")
    bits: str = Field(pattern=r"^[01]+$")
    epoch: int = Field(ge=0)
    nonces: list[int] = Field(min_length=2, max_length=2)


class FinalKeysPayload(_Payload):
    wires: list[str]


class EmptyPayload(_Payload):
    pass


@dataclass
class LogCheck:
    """Verdict of a log check plus the replayed values later steps need."""

    accepted: bool
    reason: str = ""
    steps: int = 0
    expansion: Optional[Expansion] = None
    table: dict[str, HeCiphertext] = field(default_factory=dict)
    plaintexts: dict[str, bytes] = field(default_factory=dict)
    measurements: dict[str, int] = field(default_factory=dict)
    terms: TermTable = field(default_factory=TermTable)
    term_of: dict[str, Term] = field(default_factory=dict)
    evaluated: dict[int, list[Term]] = field(default_factory=dict)
    flow: Dataflow = field(default_factory=Dataflow)
    final: Optional[LogEntry] = None
    epoch: int = 0

    def outcome_ref(self, block: str) -> Optional[str]:
        """Reference of the decoded outcome of a measured block."""
        term = self.flow.outcomes.get(block)
        return None if term is None else self.terms.ref_of(term)


class LogVerifier:
    """CheckLog: claims, replay, digests, epochs, dataflow and measurement flags."""

    def __init__(self, he: Optional[HomomorphicService] = None):
        self.he = he or homomorphic_service
        self.logger = logger

    def _reject(self, check: LogCheck, reason: str) -> LogCheck:
        check.accepted = False
        check.reason = reason
        self.logger.info(f"Log rejected reason={reason!r} steps={check.steps}")
        return check

    def check_log(
        self,
        log: Union[str, ComputationLog],
        circuit: CircuitDesc,
        he_keys: HeKeySet,
        signed_check: SignedCheck,
        plain_source: Optional[PlainSource] = None,
        budgets: Optional[tuple[int, int, int]] = None,
        level: int = 1,
    ) -> LogCheck:
        """
        Verify a computation log against a declared circuit.

        Args:
            log: Log text (parsed strictly) or an already parsed log
            circuit: Circuit the evaluator claims to have run
            he_keys: Key pairs of every epoch
            signed_check: Decides whether a (label, message, tag) record is authentic
            plain_source: When set, plaintexts of signed records come from here and a
                plaintext replay runs alongside the ciphertext replay
            budgets: (t, p, h) supply the circuit must fit in
            level: Code level the key updates and trap checks run at

        Returns:
            LogCheck with ``accepted`` and, on success, the replay tables and the expected dataflow
        """
        check = LogCheck(accepted=True)
        if isinstance(log, str):
            try:
                log = ComputationLog.from_text(log)
            except LogFormatError as e:
                return self._reject(check, f"malformed log: {e}")
        try:
            check.expansion = expand_circuit(circuit, budgets)
        except (TrapTPError, KeyError) as e:
            return self._reject(check, f"circuit cannot be expanded: {e}")
        expected = check.expansion.texts
        claims = log.claims()
        check.steps += len(expected)
        if claims != expected:
            return self._reject(check, "gate claims do not match the circuit")
        recrypt_claims = 0
        for entry in log:
            check.steps += 1
            if check.final is not None:
                return self._reject(check, f"entry {entry.seq} follows the final keys")
            try:
                outputs, plains = self._replay(entry, check, he_keys, signed_check, plain_source)
            except (TrapTPError, ValidationError, ValueError, KeyError) as e:
                return self._reject(check, f"entry {entry.seq} does not replay: {e}")
            if entry.compute_digest(outputs) != entry.digest:
                return self._reject(check, f"entry {entry.seq} digest mismatch")
            for k, ct in enumerate(outputs):
                check.table[entry.ref(k)] = ct
            if plains is not None:
                for k, pt in enumerate(plains):
                    check.plaintexts[entry.ref(k)] = pt
            reason = self._bind_terms(entry, check, len(outputs))
            if reason:
                return self._reject(check, reason)
            if entry.kind is LogEntryKind.GATE_CLAIM and entry.function_id.startswith("RECRYPT "):
                recrypt_claims += 1
            elif entry.kind is LogEntryKind.RECRYPT:
                target = entry.payload["epoch"]
                if target > check.epoch + 1:
                    return self._reject(check, f"entry {entry.seq} skips from epoch {check.epoch} to {target}")
                if target == check.epoch + 1:
                    if recrypt_claims < target:
                        return self._reject(check, f"entry {entry.seq} enters epoch {target} before its T gate")
                    check.epoch = target
            elif entry.kind in (LogEntryKind.EVAL, LogEntryKind.MEASUREMENT) and entry.payload["epoch"] > check.epoch:
                return self._reject(check, f"entry {entry.seq} works in future epoch {entry.payload['epoch']}")
            if entry.kind is LogEntryKind.MEASUREMENT:
                if entry.function_id in check.measurements:
                    return self._reject(check, f"block {entry.function_id} measured twice")
                check.measurements[entry.function_id] = entry.seq
            elif entry.kind is LogEntryKind.FINAL_KEYS:
                check.final = entry
        if expected and check.final is None:
            return self._reject(check, "log carries no final keys")
        if check.epoch != recrypt_claims:
            return self._reject(check, f"log ends in epoch {check.epoch} after {recrypt_claims} T gates")
        reason = self._check_dataflow(check, circuit, level)
        if reason:
            return self._reject(check, reason)
        for block in sorted(check.flow.flags, key=check.measurements.get):
            ref = check.terms.ref_of(check.flow.flags[block])
            if ref is None:
                return self._reject(check, f"measurement of {block} was never checked")
            check.steps += 1
            if self.read(check, ref, he_keys, plain_source is not None) != 1:
                return self._reject(check, f"trap check failed for measured block {block}")
        return check

    def read(self, check: LogCheck, ref: str, he_keys: HeKeySet, from_plaintexts: bool = False) -> int:
        """Decrypt (or look up) a one-bit value of the replay."""
        if from_plaintexts:
            return decode_bit(check.plaintexts[ref])
        ct = check.table[ref]
        return decode_bit(self.he.dec(he_keys.pair(ct.epoch), ct))

    def _bind_terms(self, entry: LogEntry, check: LogCheck, n_outputs: int) -> str:
        """Name the outputs of a replayed entry by what they were computed from."""
        terms = check.terms
        if entry.kind is LogEntryKind.ENC:
            if "tag" in entry.payload:
                outputs = [terms.record(entry.function_id, k) for k in range(n_outputs)]
            else:
                outputs = [terms.term("plain", entry.seq)]
        elif entry.kind is LogEntryKind.MEASUREMENT:
            outputs = [terms.measured(entry.function_id, entry.payload["basis"], k) for k in range(n_outputs)]
        elif entry.kind is LogEntryKind.RECRYPT:
            value, material = (check.term_of[ref] for ref in entry.inputs)
            target = entry.payload["epoch"]
            if material != terms.record(gadget_label(target), 2):
                return f"entry {entry.seq} recrypts without the key material of gadget {target}"
            outputs = [value]
        elif entry.kind is LogEntryKind.EVAL:
            inputs = tuple(check.term_of[ref] for ref in entry.inputs)
            outputs = [terms.output(entry.function_id, inputs, k) for k in range(n_outputs)]
            check.evaluated[entry.seq] = outputs
        else:
            outputs = []
        for k, term in enumerate(outputs):
            check.term_of[entry.ref(k)] = term
            terms.bind(entry.ref(k), term)
        return ""

    def _route_of(self, check: LogCheck, term: Term) -> int:
        ref = check.terms.ref_of(term)
        if ref is None:
            raise LogFormatError("a conditional P routes on an outcome the log never computes")
        return self.he.backend.route_choice(check.table[ref])

    def _check_dataflow(self, check: LogCheck, circuit: CircuitDesc, level: int) -> str:
        """Compare the replayed terms with the dataflow the claims require."""
        tracer = DataflowTracer(
            check.terms, level, self.he.backend.garden_hose_protocol, lambda term: self._route_of(check, term)
        )
        try:
            check.flow = tracer.trace(check.expansion)
        except (TrapTPError, KeyError) as e:
            return f"log does not follow the circuit: {e}"
        for seq, outputs in check.evaluated.items():
            if not set(outputs) <= check.flow.computed:
                return f"entry {seq} computes something the circuit does not need"
        for block in check.measurements:
            if block not in check.flow.flags:
                return f"block {block} is measured outside the circuit"
        for block in check.flow.flags:
            if block not in check.measurements:
                return f"measurement of {block} is missing"
        if check.final is None:
            return ""
        try:
            names = [check.expansion.final_blocks[w] for w in sorted(circuit.quantum_outputs)]
            required = [term for name in names for term in tracer.pads_of(name)]
        except (TrapTPError, KeyError) as e:
            return f"output blocks have no pads: {e}"
        claimed = [check.term_of.get(ref) for ref in check.final.inputs]
        if claimed != required:
            return "final keys are not the evaluated pads of the output blocks"
        return ""

    def _inputs(self, entry: LogEntry, check: LogCheck) -> list[HeCiphertext]:
        missing = [ref for ref in entry.inputs if ref not in check.table]
        if missing:
            raise LogFormatError(f"unknown references {','.join(missing)}")
        return [check.table[ref] for ref in entry.inputs]

    def _replay(
        self,
        entry: LogEntry,
        check: LogCheck,
        he_keys: HeKeySet,
        signed_check: SignedCheck,
        plain_source: Optional[PlainSource],
    ) -> tuple[list[HeCiphertext], Optional[list[bytes]]]:
        backend = self.he.backend
        plain = plain_source is not None
        if entry.kind is LogEntryKind.ENC:
            if entry.inputs:
                raise LogFormatError("encryptions take no inputs")
            if "tag" in entry.payload:
                signed = SignedEncPayload.model_validate(entry.payload)
                message, tag = bytes.fromhex(signed.message), bytes.fromhex(signed.tag)
                if not signed_check(entry.function_id, message, tag):
                    raise LogFormatError(f"signed record {entry.function_id} is not authentic")
                outputs = record_outputs(entry.function_id, message)
                if not plain:
                    return outputs, None
                plaintexts = plain_source(entry.function_id)
                if plaintexts is None or len(plaintexts) != len(outputs):
                    raise LogFormatError(f"no side-channel values for {entry.function_id}")
                return outputs, list(plaintexts)
            enc = PlainEncPayload.model_validate(entry.payload)
            pt = bytes.fromhex(enc.plaintext)
            return [backend.enc(he_keys.pk(enc.epoch), pt, enc.nonce)], [pt] if plain else None
        if entry.kind is LogEntryKind.EVAL:
            ev = EvalPayload.model_validate(entry.payload)
            outputs = backend.eval(he_keys.pk(ev.epoch), entry.function_id, self._inputs(entry, check), ev.nonces)
            if not plain:
                return outputs, None
            return outputs, apply_function(entry.function_id, [check.plaintexts[ref] for ref in entry.inputs])
        if entry.kind is LogEntryKind.RECRYPT:
            rc = RecryptPayload.model_validate(entry.payload)
            if len(entry.inputs) != 2:
                raise LogFormatError("recryption takes a ciphertext and key material")
            ct, material = self._inputs(entry, check)
            out = backend.recrypt(he_keys.pk(rc.epoch), material, ct, rc.nonce)
            return [out], [check.plaintexts[entry.inputs[0]]] if plain else None
        if entry.kind is LogEntryKind.MEASUREMENT:
            ms = MeasurementPayload.model_validate(entry.payload)
            if entry.inputs:
                raise LogFormatError("measurements take no inputs")
            decode_bits(ms.bits.encode("ascii"))
            pk = he_keys.pk(ms.epoch)
            values = [ms.bits.encode("ascii"), Basis(ms.basis).value.encode("ascii")]
            outputs = [backend.enc(pk, v, n) for v, n in zip(values, ms.nonces)]
            return outputs, values if plain else None
        if entry.kind is LogEntryKind.GATE_CLAIM:
            EmptyPayload.model_validate(entry.payload)
            if entry.inputs:
                raise LogFormatError("claims take no inputs")
            return [], [] if plain else None
        FinalKeysPayload.model_validate(entry.payload)
        self._inputs(entry, check)
        return [], [] if plain else None


# Global instance
log_verifier = LogVerifier()
