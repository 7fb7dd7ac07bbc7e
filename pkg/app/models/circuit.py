"""
Circuit description over {X, Z, CNOT, P, H, T, MEAS} and its text format.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.exceptions import CircuitError
from app.models.quantum import Basis

if TYPE_CHECKING:
    from app.services.statevector import StateVector


class GateKind(str, Enum):
    X = "X"
    Z = "Z"
    CNOT = "CNOT"
    P = "P"
    H = "H"
    T = "T"
    MEAS = "MEAS"


PAULI_KINDS = frozenset({GateKind.X, GateKind.Z})
SINGLE_QUBIT_KINDS = frozenset({GateKind.X, GateKind.Z, GateKind.P, GateKind.H, GateKind.T})


class Gate(BaseModel):
    """One gate; ``condition`` names a measured wire controlling an X or Z."""

    model_config = ConfigDict(frozen=True)

    kind: GateKind
    wires: tuple[int, ...]
    basis: Optional[Basis] = None
    condition: Optional[int] = None

    @model_validator(mode="after")
    def _shape(self) -> "Gate":
        arity = 2 if self.kind is GateKind.CNOT else 1
        if len(self.wires) != arity:
            raise ValueError(f"{self.kind.value} takes {arity} wire(s)")
        if any(w < 0 for w in self.wires):
            raise ValueError("negative wire index")
        if self.kind is GateKind.CNOT and self.wires[0] == self.wires[1]:
            raise ValueError("CNOT control and target must differ")
        if (self.basis is not None) != (self.kind is GateKind.MEAS):
            raise ValueError("only MEAS carries a basis")
        if self.condition is not None and self.kind not in PAULI_KINDS:
            raise ValueError("only X and Z can be classically controlled")
        return self

    @property
    def wire(self) -> int:
        return self.wires[0]

    def to_text(self) -> str:
        text = f"{self.kind.value} {' '.join(str(w) for w in self.wires)}"
        if self.basis is not None:
            text += f" {self.basis.value}"
        if self.condition is not None:
            text += f" if {self.condition}"
        return text

    @classmethod
    def from_text(cls, text: str) -> "Gate":
        parts = text.split()
        if not parts:
            raise CircuitError("empty gate")
        try:
            kind = GateKind(parts[0].upper())
            condition = None
            if len(parts) >= 2 and parts[-2] == "if":
                condition = int(parts[-1])
                parts = parts[:-2]
            if kind is GateKind.MEAS:
                basis = Basis(parts[2].upper()) if len(parts) == 3 else Basis.Z
                return cls(kind=kind, wires=(int(parts[1]),), basis=basis)
            return cls(kind=kind, wires=tuple(int(p) for p in parts[1:]), condition=condition)
        except (ValueError, IndexError) as e:
            raise CircuitError(f"cannot parse gate {text!r}: {e}") from e


class CircuitDesc(BaseModel):
    """Ordered gate list on ``n_wires`` wires with declared output wires."""

    model_config = ConfigDict(frozen=True)

    n_wires: int = Field(ge=0)
    gates: tuple[Gate, ...] = ()
    outputs: tuple[int, ...] = ()

    @model_validator(mode="before")
    @classmethod
    def _default_outputs(cls, data):
        if isinstance(data, dict) and data.get("outputs") is None:
            data = {**data, "outputs": tuple(range(int(data.get("n_wires", 0))))}
        return data

    @model_validator(mode="after")
    def _validate(self) -> "CircuitDesc":
        measured: set[int] = set()
        for gate in self.gates:
            for w in gate.wires:
                if w >= self.n_wires:
                    raise ValueError(f"gate {gate.to_text()!r} uses wire {w} of a {self.n_wires}-wire circuit")
                if w in measured:
                    raise ValueError(f"gate {gate.to_text()!r} acts on measured wire {w}")
            if gate.condition is not None and gate.condition not in measured:
                raise ValueError(f"gate {gate.to_text()!r} is controlled by a wire not yet measured")
            if gate.kind is GateKind.MEAS:
                measured.add(gate.wire)
        if len(set(self.outputs)) != len(self.outputs) or any(not 0 <= w < self.n_wires for w in self.outputs):
            raise ValueError("outputs must be distinct wires of the circuit")
        return self

    def __len__(self) -> int:
        return len(self.gates)

    def count(self, kind: GateKind) -> int:
        return sum(1 for g in self.gates if g.kind is kind)

    @property
    def t_count(self) -> int:
        return self.count(GateKind.T)

    @property
    def p_count(self) -> int:
        return self.count(GateKind.P)

    @property
    def h_count(self) -> int:
        return self.count(GateKind.H)

    @property
    def measured_wires(self) -> tuple[int, ...]:
        return tuple(g.wire for g in self.gates if g.kind is GateKind.MEAS)

    @property
    def quantum_outputs(self) -> tuple[int, ...]:
        measured = set(self.measured_wires)
        return tuple(w for w in self.outputs if w not in measured)

    @property
    def classical_outputs(self) -> tuple[int, ...]:
        measured = set(self.measured_wires)
        return tuple(w for w in self.outputs if w in measured)

    def is_clifford_pauli_only(self) -> bool:
        """True when the circuit only uses Paulis, CNOT and measurements."""
        return all(g.kind in PAULI_KINDS or g.kind in (GateKind.CNOT, GateKind.MEAS) for g in self.gates)

    def with_gates(self, gates) -> "CircuitDesc":
        return CircuitDesc(n_wires=self.n_wires, gates=tuple(gates), outputs=self.outputs)

    def to_text(self) -> str:
        lines = [f"wires {self.n_wires}", f"outputs {' '.join(str(w) for w in self.outputs)}"]
        lines.extend(g.to_text() for g in self.gates)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, n_wires: Optional[int] = None) -> "CircuitDesc":
        """
        Parse the circuit text format.

        One gate per line (or ';'-separated), '#' starts a comment, optional
        "wires N" and "outputs a b ..." header lines. Without a wires line the
        wire count is ``n_wires`` or one more than the largest wire used.
        """
        gates: list[Gate] = []
        outputs: Optional[tuple[int, ...]] = None
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            for chunk in (c.strip() for c in line.split(";")):
                if not chunk:
                    continue
                head = chunk.split()
                try:
                    if head[0] == "wires":
                        n_wires = int(head[1])
                        continue
                    if head[0] == "outputs":
                        outputs = tuple(int(w) for w in head[1:])
                        continue
                except (ValueError, IndexError) as e:
                    raise CircuitError(f"bad header line {chunk!r}") from e
                gates.append(Gate.from_text(chunk))
        if n_wires is None:
            used = [w for g in gates for w in (*g.wires, *(() if g.condition is None else (g.condition,)))]
            n_wires = max(used) + 1 if used else 0
        try:
            return cls(n_wires=n_wires, gates=tuple(gates), outputs=outputs)
        except ValueError as e:
            raise CircuitError(str(e)) from e


@dataclass
class PlainResult:
    """Plaintext channel output: unmeasured output wires as a state, measured ones as bits."""

    state: "StateVector"
    bits: dict[int, int] = field(default_factory=dict)
    quantum_wires: tuple[int, ...] = ()
    probability: float = 1.0
