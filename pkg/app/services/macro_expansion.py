"""
Canonical expansion of a circuit into gate claims over named blocks.

The evaluator executes the expansion step by step and logs each claim; the
verifier recomputes it from the declared circuit and compares texts. Wire w
starts in block "w"; P, H and T move the wire into the magic-state (or
gadget output) block they consume:

    P w  ->  CNOT mPk w; MEAS w Z; X mPk if w; Z mPk if w
    H w  ->  CNOT w mHka; MEAS w X; MEAS mHka Z; X mHkb if w; Z mHkb if mHka
    T w  ->  CNOT mTi w; MEAS w Z; X mTi if w; RECRYPT i; CONDP mTi gi if w

Magic states and gadgets are numbered from 1 in circuit order.
"""

from dataclasses import dataclass, field
from typing import Optional

from app.exceptions import BudgetError
from app.models.circuit import CircuitDesc, GateKind
from app.models.quantum import Basis


def p_block(k: int) -> str:
    return f"mP{k}"


def t_block(i: int) -> str:
    return f"mT{i}"


def h_blocks(k: int) -> tuple[str, str]:
    return f"mH{k}a", f"mH{k}b"


def socket_block(i: int, socket: int) -> str:
    return f"g{i}.{socket}"


def gadget_of(name: str) -> Optional[tuple[int, int]]:
    """(gadget, socket) for a gadget socket block name, else None."""
    if not name.startswith("g") or "." not in name:
        return None
    head, _, tail = name[1:].partition(".")
    if not head.isdigit() or not tail.isdigit():
        return None
    return int(head), int(tail)


def inner_gadget(name: str) -> Optional[int]:
    """Gadget whose pi_i an inner socket block sits under; the end sockets 0 and 5 use pi."""
    socket = gadget_of(name)
    if socket is None or socket[1] in (0, 5):
        return None
    return socket[0]


@dataclass(frozen=True)
class Claim:
    """
    One claimed step; ``wire`` is set on measurements of circuit wires.

    A RECRYPT claim carries the block its T gate measured as ``condition``:
    that outcome stays in the old epoch for the conditional P.
    """

    op: str
    blocks: tuple[str, ...] = ()
    basis: Optional[Basis] = None
    condition: Optional[str] = None
    gadget: Optional[int] = None
    wire: Optional[int] = None

    @property
    def text(self) -> str:
        if self.op == "RECRYPT":
            return f"RECRYPT {self.gadget}"
        parts = [self.op, *self.blocks]
        if self.op == "CONDP":
            parts.append(f"g{self.gadget}")
        if self.basis is not None:
            parts.append(self.basis.value)
        if self.condition is not None:
            parts.extend(["if", self.condition])
        return " ".join(parts)


@dataclass
class Expansion:
    claims: list[Claim] = field(default_factory=list)
    groups: list[tuple[GateKind, list[Claim]]] = field(default_factory=list)
    final_blocks: dict[int, str] = field(default_factory=dict)
    measured: dict[int, str] = field(default_factory=dict)
    t_count: int = 0
    p_count: int = 0
    h_count: int = 0

    @property
    def texts(self) -> list[str]:
        return [c.text for c in self.claims]


def expand_circuit(circuit: CircuitDesc, budgets: Optional[tuple[int, int, int]] = None) -> Expansion:
    """
    Expand a circuit into claims.

    Args:
        circuit: Declared circuit
        budgets: (t, p, h) supply; exceeding it raises BudgetError

    Returns:
        Claims plus the final block of every wire and the block measured for every measured wire
    """
    if budgets is not None:
        for name, need, have in zip("TPH", (circuit.t_count, circuit.p_count, circuit.h_count), budgets):
            if need > have:
                raise BudgetError(f"circuit needs {need} {name} resources, evaluation key holds {have}")
    exp = Expansion()
    blocks = {w: str(w) for w in range(circuit.n_wires)}
    for gate in circuit.gates:
        claims: list[Claim] = []
        exp.groups.append((gate.kind, claims))
        if gate.kind in (GateKind.X, GateKind.Z):
            cond = exp.measured[gate.condition] if gate.condition is not None else None
            claims.append(Claim(gate.kind.value, (blocks[gate.wire],), condition=cond))
        elif gate.kind is GateKind.CNOT:
            claims.append(Claim("CNOT", (blocks[gate.wires[0]], blocks[gate.wires[1]])))
        elif gate.kind is GateKind.MEAS:
            w = gate.wire
            claims.append(Claim("MEAS", (blocks[w],), basis=gate.basis, wire=w))
            exp.measured[w] = blocks[w]
        elif gate.kind is GateKind.P:
            exp.p_count += 1
            w, magic = blocks[gate.wire], p_block(exp.p_count)
            claims.extend(
                [
                    Claim("CNOT", (magic, w)),
                    Claim("MEAS", (w,), basis=Basis.Z),
                    Claim("X", (magic,), condition=w),
                    Claim("Z", (magic,), condition=w),
                ]
            )
            blocks[gate.wire] = magic
        elif gate.kind is GateKind.H:
            exp.h_count += 1
            w = blocks[gate.wire]
            half_a, half_b = h_blocks(exp.h_count)
            claims.extend(
                [
                    Claim("CNOT", (w, half_a)),
                    Claim("MEAS", (w,), basis=Basis.X),
                    Claim("MEAS", (half_a,), basis=Basis.Z),
                    Claim("X", (half_b,), condition=w),
                    Claim("Z", (half_b,), condition=half_a),
                ]
            )
            blocks[gate.wire] = half_b
        else:
            exp.t_count += 1
            i = exp.t_count
            w, magic = blocks[gate.wire], t_block(i)
            claims.extend(
                [
                    Claim("CNOT", (magic, w)),
                    Claim("MEAS", (w,), basis=Basis.Z),
                    Claim("X", (magic,), condition=w),
                    Claim("RECRYPT", condition=w, gadget=i),
                    Claim("CONDP", (magic,), condition=w, gadget=i),
                ]
            )
            blocks[gate.wire] = socket_block(i, 5)
        exp.claims.extend(claims)
    exp.final_blocks = dict(blocks)
    return exp
