"""
Logical-qubit workspace kept as a set of independent product factors.

Handles are globally unique, so two workspaces can be merged by plain union
(an evaluation key and a ciphertext produced separately end up in one
register when a server evaluates). Factors only merge when a two-qubit gate
entangles them, which keeps every factor far below the qubit cap.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from app.exceptions import DimensionError, QubitIndexError
from app.models.quantum import Basis
from app.services.rng_service import RngStream
from app.services.statevector import StateVector, qsim

logger = logging.getLogger("app.qsim")

_handle_ids = itertools.count(1)
_factor_ids = itertools.count(1)


@dataclass
class Factor:
    handles: list[int]
    state: StateVector


class QubitWorkspace:
    """Collection of logical qubits addressed by handle."""

    def __init__(self):
        self._factors: dict[int, Factor] = {}
        self._where: dict[int, int] = {}

    def __contains__(self, handle: int) -> bool:
        return handle in self._where

    def __len__(self) -> int:
        return len(self._where)

    @property
    def handles(self) -> list[int]:
        return sorted(self._where)

    def factors(self) -> list[Factor]:
        return [self._factors[fid] for fid in sorted(self._factors)]

    def add(self, state: StateVector) -> list[int]:
        """Add a state as a new factor and return one fresh handle per qubit."""
        handles = [next(_handle_ids) for _ in range(state.n_qubits)]
        if not handles:
            return handles
        fid = next(_factor_ids)
        self._factors[fid] = Factor(handles, state)
        for h in handles:
            self._where[h] = fid
        return handles

    def merge(self, other: "QubitWorkspace") -> None:
        """Take over every factor of another workspace (which is left empty)."""
        overlap = set(self._where) & set(other._where)
        if overlap:
            raise DimensionError(f"workspaces share handles {sorted(overlap)}")
        self._factors.update(other._factors)
        self._where.update(other._where)
        other._factors = {}
        other._where = {}

    def _locate(self, handle: int) -> tuple[int, int]:
        if handle not in self._where:
            raise QubitIndexError(f"unknown qubit handle {handle}")
        fid = self._where[handle]
        return fid, self._factors[fid].handles.index(handle)

    def _join(self, fid_a: int, fid_b: int) -> int:
        if fid_a == fid_b:
            return fid_a
        a, b = self._factors.pop(fid_a), self._factors.pop(fid_b)
        fid = next(_factor_ids)
        self._factors[fid] = Factor(a.handles + b.handles, qsim.tensor(a.state, b.state))
        for h in self._factors[fid].handles:
            self._where[h] = fid
        return fid

    def _drop(self, fid: int, pos: int) -> None:
        factor = self._factors[fid]
        handle = factor.handles.pop(pos)
        del self._where[handle]
        factor.state = qsim.discard_qubit(factor.state, pos)
        if not factor.handles:
            del self._factors[fid]

    def apply_gate(self, handle: int, gate: str) -> None:
        fid, pos = self._locate(handle)
        factor = self._factors[fid]
        factor.state = qsim.apply_gate(factor.state, gate, pos)

    def apply_pauli(self, handle: int, x: int, z: int) -> None:
        fid, pos = self._locate(handle)
        factor = self._factors[fid]
        factor.state = qsim.apply_pauli(factor.state, pos, x, z)

    def apply_cnot(self, control: int, target: int) -> None:
        if control == target:
            raise QubitIndexError("CNOT control and target must differ")
        fid = self._join(self._locate(control)[0], self._locate(target)[0])
        factor = self._factors[fid]
        factor.state = qsim.apply_cnot(factor.state, factor.handles.index(control), factor.handles.index(target))

    def measure(self, handle: int, basis: Basis, rng: RngStream) -> int:
        """Measure and remove a qubit; returns the outcome bit."""
        fid, pos = self._locate(handle)
        factor = self._factors[fid]
        outcome, factor.state = qsim.measure(factor.state, pos, basis, rng)
        self._drop(fid, pos)
        return outcome.bit

    def project(self, handle: int, bit: int, basis: Basis = Basis.Z) -> float:
        """Force an outcome, remove the qubit and return the outcome probability."""
        fid, pos = self._locate(handle)
        factor = self._factors[fid]
        prob, factor.state = qsim.project(factor.state, pos, bit, basis)
        self._drop(fid, pos)
        return prob

    def bell_measure(self, h1: int, h2: int, rng: RngStream) -> tuple[int, int]:
        self.apply_cnot(h1, h2)
        b = self.measure(h1, Basis.X, rng)
        a = self.measure(h2, Basis.Z, rng)
        return a, b

    def discard(self, handles: Iterable[int], rng: RngStream) -> None:
        """Trace qubits out by measuring them and forgetting the outcome."""
        for h in list(handles):
            if h in self._where:
                self.measure(h, Basis.Z, rng)

    def extract(self, handles: Sequence[int], rng: Optional[RngStream] = None) -> StateVector:
        """
        Remove the given qubits and return their joint state in the given order.

        Other members of the factors involved are traced out by measurement
        (requires ``rng`` when there are any); unrelated factors are untouched.
        """
        if len(set(handles)) != len(handles):
            raise QubitIndexError("duplicate handles in extract")
        if not handles:
            return qsim.new_register(0)
        fids = []
        for h in handles:
            fid, _ = self._locate(h)
            if fid not in fids:
                fids.append(fid)
        fid = fids[0]
        for other in fids[1:]:
            fid = self._join(fid, other)
        extra = [h for h in self._factors[fid].handles if h not in handles]
        if extra:
            if rng is None:
                raise DimensionError("tracing out entangled qubits needs a random stream")
            for h in extra:
                self.measure(h, Basis.Z, rng)
            fid = self._where[handles[0]]
        factor = self._factors.pop(fid)
        for h in factor.handles:
            del self._where[h]
        perm = [list(handles).index(h) for h in factor.handles]
        return qsim.permute_qubits(factor.state, perm)

    def peek(self, handles: Sequence[int]) -> StateVector:
        """Joint state of handles that make up whole factors, without consuming them."""
        fids = []
        for h in handles:
            fid, _ = self._locate(h)
            if fid not in fids:
                fids.append(fid)
        members = [h for fid in fids for h in self._factors[fid].handles]
        if sorted(members) != sorted(handles):
            raise DimensionError("peek handles are entangled with other qubits")
        state = self._factors[fids[0]].state
        for fid in fids[1:]:
            state = qsim.tensor(state, self._factors[fid].state)
        return qsim.permute_qubits(state, [list(handles).index(h) for h in members])
