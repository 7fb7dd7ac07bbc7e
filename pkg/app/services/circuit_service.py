"""
Plaintext circuit execution (the ideal channel Phi_c) and random circuit generation.
"""

import logging
from typing import Optional, Sequence

from app.exceptions import CircuitError, DimensionError
from app.models.circuit import CircuitDesc, Gate, GateKind, PlainResult
from app.models.quantum import Basis
from app.services.rng_service import RngStream
from app.services.statevector import StateVector
from app.services.workspace import QubitWorkspace

logger = logging.getLogger("app.circuits")

ALL_KINDS = (GateKind.X, GateKind.Z, GateKind.CNOT, GateKind.P, GateKind.H, GateKind.T, GateKind.MEAS)
PAULI_CNOT_KINDS = (GateKind.X, GateKind.Z, GateKind.CNOT, GateKind.MEAS)


class CircuitService:
    """Runs circuits on plaintext states and builds random test circuits."""

    def __init__(self):
        self.logger = logger

    def parse(self, text: str, n_wires: Optional[int] = None) -> CircuitDesc:
        return CircuitDesc.from_text(text, n_wires)

    def simulate(
        self,
        circuit: CircuitDesc,
        state: StateVector,
        rng: Optional[RngStream] = None,
        forced: Optional[dict[int, int]] = None,
    ) -> PlainResult:
        """
        Apply the ideal channel of a circuit to a plaintext state.

        Args:
            circuit: Circuit to run
            state: Input state on ``circuit.n_wires`` qubits
            rng: Stream for measurement sampling and trace-out
            forced: Measurement outcomes to post-select on, by wire

        Returns:
            Output state of the unmeasured output wires and bits of the measured ones
        """
        if state.n_qubits != circuit.n_wires:
            raise DimensionError(f"circuit has {circuit.n_wires} wires, state has {state.n_qubits} qubits")
        forced = forced or {}
        ws = QubitWorkspace()
        handles = ws.add(state)
        bits: dict[int, int] = {}
        probability = 1.0
        for gate in circuit.gates:
            h = handles[gate.wire] if gate.wires else None
            if gate.kind is GateKind.CNOT:
                ws.apply_cnot(handles[gate.wires[0]], handles[gate.wires[1]])
            elif gate.kind is GateKind.MEAS:
                if gate.wire in forced:
                    probability *= ws.project(h, forced[gate.wire], gate.basis)
                    bits[gate.wire] = forced[gate.wire]
                else:
                    if rng is None:
                        raise CircuitError("measuring circuits need a random stream or forced outcomes")
                    bits[gate.wire] = ws.measure(h, gate.basis, rng)
            elif gate.condition is not None:
                if bits[gate.condition]:
                    ws.apply_gate(h, gate.kind.value)
            else:
                ws.apply_gate(h, gate.kind.value)
        quantum = circuit.quantum_outputs
        out_state = ws.extract([handles[w] for w in quantum], rng)
        return PlainResult(
            state=out_state,
            bits={w: bits[w] for w in circuit.classical_outputs},
            quantum_wires=quantum,
            probability=probability,
        )

    def random_circuit(
        self,
        rng: RngStream,
        n_wires: int = 2,
        n_gates: int = 10,
        kinds: Sequence[GateKind] = ALL_KINDS,
        max_t: int = 2,
        max_p: int = 3,
        max_h: int = 2,
        measure_weight: float = 0.1,
        conditional_weight: float = 0.3,
    ) -> CircuitDesc:
        """
        Random circuit respecting the T/P/H budgets; measured wires are never reused.

        Conditional X/Z gates controlled by already measured wires are drawn
        with probability ``conditional_weight`` once a wire has been measured.
        """
        live = list(range(n_wires))
        measured: list[int] = []
        gates: list[Gate] = []
        budget = {GateKind.T: max_t, GateKind.P: max_p, GateKind.H: max_h}
        for _ in range(n_gates):
            if not live:
                break
            options = []
            for kind in kinds:
                if kind in budget and budget[kind] <= 0:
                    continue
                if kind is GateKind.CNOT and len(live) < 2:
                    continue
                if kind is GateKind.MEAS:
                    continue
                options.append(kind)
            if GateKind.MEAS in kinds and (rng.random() < measure_weight or not options):
                wire = live.pop(int(rng.integers(0, len(live))))
                basis = Basis.Z if rng.bit() == 0 else Basis.X
                gates.append(Gate(kind=GateKind.MEAS, wires=(wire,), basis=basis))
                measured.append(wire)
                continue
            if not options:
                break
            kind = options[int(rng.integers(0, len(options)))]
            if kind is GateKind.CNOT:
                pair = rng.choice(len(live), 2)
                gates.append(Gate(kind=kind, wires=(live[int(pair[0])], live[int(pair[1])])))
                continue
            wire = live[int(rng.integers(0, len(live)))]
            condition = None
            if kind in (GateKind.X, GateKind.Z) and measured and rng.random() < conditional_weight:
                condition = measured[int(rng.integers(0, len(measured)))]
            if kind in budget:
                budget[kind] -= 1
            gates.append(Gate(kind=kind, wires=(wire,), condition=condition))
        return CircuitDesc(n_wires=n_wires, gates=tuple(gates))


# Global instance
circuit_service = CircuitService()
