"""
Expected classical dataflow of a claim expansion.

Every ciphertext of a replayed log is named by a term: signed records and
measurement records are leaves, each function evaluation is a node over the
terms of its inputs, and a recryption keeps the term of the value it moves
to the next epoch. Running the expansion over terms, the way an honest
evaluation session runs it over ciphertexts, yields the pads every block must
end with, the outcome term of every measurement and the trap flag that must
accept it. A log that computes anything else does not describe its circuit.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

from app.exceptions import GadgetError, LogFormatError
from app.models.gardenhose import GardenHoseSpec
from app.models.quantum import Basis
from app.models.traptp import gadget_label, pad_label
from app.services.css_code import get_code
from app.services.macro_expansion import Expansion, inner_gadget, socket_block

logger = logging.getLogger("app.log")

Term = int


class TermTable:
    """Interned terms plus the first log reference carrying each of them."""

    def __init__(self):
        self._ids: dict[tuple, Term] = {}
        self._refs: dict[Term, str] = {}

    def term(self, *node) -> Term:
        return self._ids.setdefault(node, len(self._ids))

    def record(self, label: str, k: int) -> Term:
        return self.term("record", label, k)

    def measured(self, block: str, basis: Basis, k: int) -> Term:
        return self.term("measurement", block, Basis(basis).value, k)

    def output(self, function_id: str, inputs: tuple[Term, ...], k: int) -> Term:
        return self.term("eval", function_id, inputs, k)

    def bind(self, ref: str, term: Term) -> None:
        self._refs.setdefault(term, ref)

    def ref_of(self, term: Term) -> Optional[str]:
        return self._refs.get(term)


@dataclass
class Dataflow:
    """Terms an honest log of the expansion produces."""

    computed: set[Term] = field(default_factory=set)
    pads: dict[str, tuple[Term, Term]] = field(default_factory=dict)
    outcomes: dict[str, Term] = field(default_factory=dict)
    flags: dict[str, Term] = field(default_factory=dict)


class DataflowTracer:
    """Runs claims over terms, mirroring the key updates of an evaluation session."""

    def __init__(
        self,
        terms: TermTable,
        level: int,
        protocol: Callable[[], Optional[GardenHoseSpec]],
        route_of: Callable[[Term], int],
    ):
        self.terms = terms
        self.level = level
        self.m = get_code(level).m
        self.protocol = protocol
        self.route_of = route_of
        self.flow = Dataflow()
        self.logger = logger

    def trace(self, expansion: Expansion) -> Dataflow:
        for claim in expansion.claims:
            if claim.op == "CNOT":
                self.cnot(*claim.blocks)
            elif claim.op == "MEAS":
                self.measure(claim.blocks[0], claim.basis)
            elif claim.op in ("X", "Z"):
                self.pauli(claim.op, claim.blocks[0], claim.condition)
            elif claim.op == "CONDP":
                self.cond_p(claim.blocks[0], claim.gadget, claim.condition)
            elif claim.op != "RECRYPT":
                raise LogFormatError(f"claim {claim.text!r} has no dataflow")
        self.logger.debug(f"Dataflow traced claims={len(expansion.claims)} terms={len(self.flow.computed)}")
        return self.flow

    def _eval(self, function_id: str, inputs: list[Term], n_outputs: int) -> list[Term]:
        key = tuple(inputs)
        outputs = [self.terms.output(function_id, key, k) for k in range(n_outputs)]
        self.flow.computed.update(outputs)
        return outputs

    def pads_of(self, name: str) -> tuple[Term, Term]:
        if name in self.flow.outcomes:
            raise LogFormatError(f"block {name} is used after its measurement")
        if name not in self.flow.pads:
            label = pad_label(name)
            self.flow.pads[name] = (self.terms.record(label, 0), self.terms.record(label, 1))
        return self.flow.pads[name]

    def perm_for(self, name: str) -> Term:
        index = inner_gadget(name)
        if index is not None:
            return self.terms.record(gadget_label(index), 1)
        return self.terms.record("keys", 0)

    def outcome(self, name: str) -> Term:
        if name not in self.flow.outcomes:
            raise LogFormatError(f"block {name} is used as a condition before its measurement")
        return self.flow.outcomes[name]

    def cnot(self, control: str, target: str) -> None:
        xc, zc = self.pads_of(control)
        xt, zt = self.pads_of(target)
        new_xc, new_zc, new_xt, new_zt = self._eval("cnot-key-update", [xc, zc, xt, zt], 4)
        self.flow.pads[control] = (new_xc, new_zc)
        self.flow.pads[target] = (new_xt, new_zt)

    def pauli(self, kind: str, name: str, condition: Optional[str] = None) -> None:
        x, z = self.pads_of(name)
        perm = self.perm_for(name)
        (layout,) = self._eval("unpermute", [x if kind == "X" else z, perm], 1)
        if condition is None:
            (flipped,) = self._eval(f"bit-flip-mask:{self.m}", [layout], 1)
        else:
            (mask,) = self._eval(f"expand-bit:{self.m}", [self.outcome(condition)], 1)
            (flipped,) = self._eval("xor", [layout, mask], 1)
        (updated,) = self._eval("permute", [flipped, perm], 1)
        self.flow.pads[name] = (updated, z) if kind == "X" else (x, updated)

    def measure(self, name: str, basis: Basis) -> Term:
        x, z = self.pads_of(name)
        record = [self.terms.measured(name, basis, k) for k in range(2)]
        bit, flag = self._eval(f"tc-verdec-measurement:{self.level}", [self.perm_for(name), x, z, *record], 2)
        del self.flow.pads[name]
        self.flow.outcomes[name] = bit
        self.flow.flags[name] = flag
        return bit

    def bell(self, first: str, second: str) -> tuple[Term, Term]:
        self.cnot(first, second)
        b = self.measure(first, Basis.X)
        a = self.measure(second, Basis.Z)
        return a, b

    def cond_p(self, data: str, index: int, condition: str) -> None:
        spec = self.protocol()
        if spec is None:
            raise GadgetError("backend declares no garden-hose protocol")
        b = self.outcome(condition)
        g = self.terms.record(gadget_label(index), 0)
        a1, a2 = self.bell(data, socket_block(index, spec.in_socket))
        (route,) = self._eval("gh-route", [b, g], 1)
        hops: list[Term] = []
        for u, v in spec.routes[self.route_of(b)]:
            hops.extend(self.bell(socket_block(index, u), socket_block(index, v)))
        (outcomes,) = self._eval("concat", hops, 1)
        out = socket_block(index, spec.out_socket)
        x, z = self.pads_of(out)
        new_x, new_z = self._eval(
            f"t-key-update:{self.level}", [x, z, self.perm_for(out), a1, a2, outcomes, route, g], 2
        )
        self.flow.pads[out] = (new_x, new_z)
        for socket in range(2 * spec.pair_count):
            name = socket_block(index, socket)
            if name != out:
                self.flow.pads.pop(name, None)
