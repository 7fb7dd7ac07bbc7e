"""
Server-side state of one homomorphic evaluation.

The session owns the merged register (ciphertext plus evaluation key), the
computation log and a table of the current pad ciphertexts of every block
it has touched. Signed records are copied into the log the first time the
values they carry are needed; resources signed under an earlier epoch are
caught up by chained recryption.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

from app.exceptions import GadgetError, SlotError
from app.models.crypto import HeCiphertext, HePublicKey, SignedMessage
from app.models.log import ComputationLog, LogEntry, LogEntryKind
from app.models.quantum import Basis
from app.models.traptp import EvalKey, VqfheCiphertext, pad_label, record_outputs
from app.services.he_functions import encode_bits
from app.services.he_service import HomomorphicService
from app.services.macro_expansion import Claim, inner_gadget
from app.services.rng_service import RngStream

logger = logging.getLogger("app.traptp")


@dataclass(frozen=True)
class Handle:
    """A ciphertext together with its log reference."""

    ref: str
    ct: HeCiphertext

    @property
    def epoch(self) -> int:
        return self.ct.epoch


class EvaluationSession:
    """Executes claims on an encrypted register and records every classical step."""

    def __init__(self, evk: EvalKey, ct: VqfheCiphertext, rng: RngStream, he: HomomorphicService):
        if evk.consumed:
            raise GadgetError("evaluation key resources were already consumed")
        if ct.evaluated:
            raise SlotError("ciphertext was already evaluated")
        evk.consumed = True
        self.he = he
        self.rng = rng
        self.level = evk.params.level
        self.register = ct.register
        self.register.merge(evk.register)
        self.blocks: dict[str, int] = {**evk.blocks, **ct.blocks}
        self.signed: dict[str, SignedMessage] = {**evk.pads, **ct.pads}
        self.gadget_records = dict(evk.gadgets)
        self.keys_record = evk.keys
        self.pks: tuple[HePublicKey, ...] = evk.public_keys()
        self.log = ComputationLog()
        self.epoch = 0
        self.pads: dict[str, tuple[Handle, Handle]] = {}
        self.outcomes: dict[str, Handle] = {}
        self.used_gadgets: set[int] = set()
        self._pi: Optional[Handle] = None
        self._gadgets: dict[int, tuple[Handle, Handle, Handle]] = {}
        self.logger = logger

    # log primitives

    def _append(self, entry: LogEntry) -> LogEntry:
        return self.log.append(entry)

    def _log_signed(self, record: SignedMessage) -> list[Handle]:
        entry = self._append(
            LogEntry(
                kind=LogEntryKind.ENC,
                function_id=record.label,
                payload={"message": record.message.hex(), "tag": record.tag.hex()},
                outputs=tuple(record_outputs(record.label, record.message)),
            )
        )
        return [Handle(entry.ref(k), ct) for k, ct in enumerate(entry.outputs)]

    def claim(self, claim: Claim) -> None:
        self._append(LogEntry(kind=LogEntryKind.GATE_CLAIM, function_id=claim.text))

    def eval_function(self, function_id: str, inputs: Sequence[Handle]) -> list[Handle]:
        outputs, entry = self.he.eval(
            self.pks[self.epoch], function_id, [h.ct for h in inputs], self.rng, refs=[h.ref for h in inputs]
        )
        stored = self._append(entry)
        return [Handle(stored.ref(k), ct) for k, ct in enumerate(outputs)]

    def _recrypt(self, handle: Handle, target: int) -> Handle:
        _, _, material = self.gadget(target)
        out, entry = self.he.recrypt(self.pks[target], material.ct, handle.ct, self.rng, refs=[handle.ref, material.ref])
        stored = self._append(entry)
        return Handle(stored.ref(0), out)

    def catch_up(self, handle: Handle) -> Handle:
        while handle.epoch < self.epoch:
            handle = self._recrypt(handle, handle.epoch + 1)
        return handle

    # key material

    def gadget(self, index: int) -> tuple[Handle, Handle, Handle]:
        """(g_i, pi_i, sk_{i-1}) of gadget ``index``, logged on first use."""
        if index not in self._gadgets:
            if index not in self.gadget_records:
                raise GadgetError(f"evaluation key holds no gadget {index}")
            g, pi_i, material = self._log_signed(self.gadget_records[index])
            self._gadgets[index] = (g, pi_i, material)
        return self._gadgets[index]

    def current_pi(self) -> Handle:
        if self._pi is None:
            (self._pi,) = self._log_signed(self.keys_record)
        self._pi = self.catch_up(self._pi)
        return self._pi

    def perm_for(self, name: str) -> Handle:
        """Encrypted permutation a block sits under: pi_i for inner gadget sockets, pi otherwise."""
        index = inner_gadget(name)
        if index is not None:
            return self.gadget(index)[1]
        return self.current_pi()

    def pads_of(self, name: str) -> tuple[Handle, Handle]:
        if name not in self.pads:
            label = pad_label(name)
            if label not in self.signed:
                raise SlotError(f"no pad record for block {name}")
            x, z = self._log_signed(self.signed[label])
            self.pads[name] = (x, z)
        x, z = self.pads[name]
        self.pads[name] = (self.catch_up(x), self.catch_up(z))
        return self.pads[name]

    def set_pads(self, name: str, x: Handle, z: Handle) -> None:
        self.pads[name] = (x, z)

    def outcome(self, name: str) -> Handle:
        if name not in self.outcomes:
            raise SlotError(f"block {name} has not been measured")
        return self.outcomes[name]

    def block_id(self, name: str) -> int:
        if name not in self.blocks:
            raise SlotError(f"unknown block {name}")
        return self.blocks[name]

    # gate evaluation

    def cnot(self, control: str, target: str) -> None:
        """Transversal CNOT plus the homomorphic CNOT key update."""
        self.register.transversal_cnot(self.block_id(control), self.block_id(target))
        xc, zc = self.pads_of(control)
        xt, zt = self.pads_of(target)
        new_xc, new_zc, new_xt, new_zt = self.eval_function("cnot-key-update", [xc, zc, xt, zt])
        self.pads[control] = (new_xc, new_zc)
        self.pads[target] = (new_xt, new_zt)

    def pauli(self, kind: str, name: str, condition: Optional[str] = None) -> None:
        """
        X or Z (optionally conditioned on a measured block) as a pure key update.

        The pad is unpermuted, its first m bits flipped (or xored with the
        expanded condition bit) and permuted back; no qubit is touched.
        """
        m = self.register.m
        x, z = self.pads_of(name)
        target = x if kind == "X" else z
        perm = self.perm_for(name)
        (layout,) = self.eval_function("unpermute", [target, perm])
        if condition is None:
            (flipped,) = self.eval_function(f"bit-flip-mask:{m}", [layout])
        else:
            cond = self.catch_up(self.outcome(condition))
            (mask,) = self.eval_function(f"expand-bit:{m}", [cond])
            (flipped,) = self.eval_function("xor", [layout, mask])
        (updated,) = self.eval_function("permute", [flipped, perm])
        self.pads[name] = (updated, z) if kind == "X" else (x, updated)

    def measure(self, name: str, basis: Basis) -> Handle:
        """
        Measure a block, log the encrypted record and check it homomorphically.

        Returns:
            Encrypted logical outcome
        """
        basis = Basis(basis)
        x, z = self.pads_of(name)
        perm = self.perm_for(name)
        record = self.register.measure_block(self.block_id(name), basis, self.rng)
        pk = self.pks[self.epoch]
        n1, n2 = self.rng.uint64(), self.rng.uint64()
        bits = encode_bits(record)
        entry = self._append(
            LogEntry(
                kind=LogEntryKind.MEASUREMENT,
                function_id=name,
                payload={"basis": basis.value, "bits": bits.decode("ascii"), "epoch": self.epoch, "nonces": [n1, n2]},
                outputs=(self.he.backend.enc(pk, bits, n1), self.he.backend.enc(pk, basis.value.encode("ascii"), n2)),
            )
        )
        measured = [Handle(entry.ref(k), ct) for k, ct in enumerate(entry.outputs)]
        bit, _flag = self.eval_function(f"tc-verdec-measurement:{self.level}", [perm, x, z, *measured])
        self.outcomes[name] = bit
        del self.pads[name]
        return bit

    def bell(self, first: str, second: str) -> tuple[Handle, Handle]:
        """Encrypted Bell measurement; returns (Z outcome of ``second``, X outcome of ``first``)."""
        self.cnot(first, second)
        b = self.measure(first, Basis.X)
        a = self.measure(second, Basis.Z)
        return a, b

    def recrypt_all(self, target: int, exclude: Optional[str] = None) -> None:
        """Move every live classical ciphertext except one outcome to the next epoch."""
        if target != self.epoch + 1:
            raise GadgetError(f"cannot recrypt from epoch {self.epoch} to {target}")
        self.gadget(target)
        for name in sorted(self.pads):
            x, z = self.pads[name]
            self.pads[name] = (self._recrypt(x, target), self._recrypt(z, target))
        if self._pi is not None:
            self._pi = self._recrypt(self.catch_up(self._pi), target)
        for name in sorted(self.outcomes):
            if name != exclude and self.outcomes[name].epoch == self.epoch:
                self.outcomes[name] = self._recrypt(self.outcomes[name], target)
        self.epoch = target
        self.logger.debug(f"Epoch advanced epoch={target} live_pads={len(self.pads)}")

    def drop_block(self, name: str) -> None:
        """Trace out a block that is no longer needed."""
        block_id = self.blocks.get(name)
        if block_id is not None and not self.register.block(block_id).measured:
            self.register.discard_block(block_id, self.rng)
        self.pads.pop(name, None)

    def finish(self, outputs: dict[int, str]) -> dict[int, tuple[Handle, Handle]]:
        """
        Log the claimed final keys of the quantum outputs and trace out everything else.

        Args:
            outputs: Output wire -> final block name

        Returns:
            Final pad handles per output wire
        """
        final = {w: self.pads_of(name) for w, name in outputs.items()}
        refs = [ref for w in sorted(final) for ref in (final[w][0].ref, final[w][1].ref)]
        self._append(
            LogEntry(
                kind=LogEntryKind.FINAL_KEYS,
                function_id="final-keys",
                inputs=tuple(refs),
                payload={"wires": [outputs[w] for w in sorted(outputs)]},
            )
        )
        keep = set(outputs.values())
        for name in sorted(self.blocks):
            if name not in keep:
                self.drop_block(name)
        return final
