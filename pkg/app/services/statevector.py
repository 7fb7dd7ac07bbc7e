"""
Pure-state quantum simulator.

Qubit 0 is the most significant index bit (Kronecker order). States are
immutable values: every operation returns a new ``StateVector``.
"""

import logging
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from app.exceptions import CapacityError, DimensionError, ProjectionError, QubitIndexError
from app.models.quantum import Basis, MeasOutcome
from app.services.config_service import config_service
from app.services.rng_service import RngStream

logger = logging.getLogger("app.qsim")

TOLERANCE = 1e-9

_SQRT_HALF = 1 / np.sqrt(2)

GATES: dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
    "H": np.array([[1, 1], [1, -1]], dtype=np.complex128) * _SQRT_HALF,
    "P": np.array([[1, 0], [0, 1j]], dtype=np.complex128),
    "T": np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=np.complex128),
}

_INIT_VECTORS = {
    "0": np.array([1, 0], dtype=np.complex128),
    "1": np.array([0, 1], dtype=np.complex128),
    "+": np.array([1, 1], dtype=np.complex128) * _SQRT_HALF,
    "-": np.array([1, -1], dtype=np.complex128) * _SQRT_HALF,
}


def qubit_cap() -> int:
    return int(config_service.get_setting("qubit_cap", 24))


def _check_cap(n: int) -> None:
    cap = qubit_cap()
    if n > cap:
        raise CapacityError(f"register of {n} qubits exceeds cap {cap}")


@dataclass(frozen=True, eq=False)
class StateVector:
    """Unit-norm amplitude vector over ``n_qubits`` qubits."""

    n_qubits: int
    amplitudes: np.ndarray
    lineage: tuple[tuple[int, int], ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.n_qubits < 0:
            raise DimensionError("negative qubit count")
        _check_cap(self.n_qubits)
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.shape != (1 << self.n_qubits,):
            raise DimensionError(f"expected {1 << self.n_qubits} amplitudes, got {amps.shape[0]}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n_qubits) if self.n_qubits else self.amplitudes.reshape(())

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def with_lineage(self, rng: Optional[RngStream]) -> tuple[tuple[int, int], ...]:
        if rng is None:
            return self.lineage
        return self.lineage + ((rng.seed, rng.draws),)


_active_counter: ContextVar[Optional["OperationCounter"]] = ContextVar("qsim_operation_counter", default=None)


class OperationCounter:
    """Counts simulator gate and measurement calls made inside a ``with`` block."""

    def __init__(self):
        self.gates = 0
        self.measurements = 0
        self._token = None

    @property
    def total(self) -> int:
        return self.gates + self.measurements

    def __enter__(self) -> "OperationCounter":
        self._token = _active_counter.set(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _active_counter.reset(self._token)

    def __repr__(self) -> str:
        return f"OperationCounter(gates={self.gates}, measurements={self.measurements})"


def _count(kind: str) -> None:
    counter = _active_counter.get()
    if counter is None:
        return
    if kind == "gate":
        counter.gates += 1
    else:
        counter.measurements += 1


def _check_qubit(s: StateVector, q: int) -> None:
    if not 0 <= q < s.n_qubits:
        raise QubitIndexError(f"qubit {q} out of range for {s.n_qubits}-qubit register")


def _apply_matrix(s: StateVector, u: np.ndarray, q: int) -> np.ndarray:
    psi = s.tensor()
    out = np.tensordot(u, psi, axes=([1], [q]))
    return np.moveaxis(out, 0, q).reshape(-1)


def _bit_axis_slice(n: int, q: int, bit: int) -> tuple:
    index: list = [slice(None)] * n
    index[q] = bit
    return tuple(index)


class QuantumSimulator:
    """State-vector operations with cap enforcement and operation counting."""

    def __init__(self):
        self.logger = logger

    def new_register(self, n: int, init: Optional[str] = None) -> StateVector:
        """
        Product state of |0>, |1>, |+> or |-> per qubit.

        Args:
            n: Number of qubits
            init: One character per qubit from "01+-" (default all zeros)

        Returns:
            New state vector
        """
        _check_cap(n)
        init = "0" * n if init is None else init
        if len(init) != n:
            raise DimensionError(f"init string {init!r} does not describe {n} qubits")
        amps = np.ones(1, dtype=np.complex128)
        for ch in init:
            if ch not in _INIT_VECTORS:
                raise DimensionError(f"unknown init symbol {ch!r}")
            amps = np.kron(amps, _INIT_VECTORS[ch])
        return StateVector(n, amps)

    def from_amplitudes(self, amplitudes: Sequence[complex], normalize: bool = False) -> StateVector:
        amps = np.asarray(amplitudes, dtype=np.complex128)
        n = int(round(np.log2(len(amps)))) if len(amps) else -1
        if n < 0 or (1 << n) != len(amps):
            raise DimensionError(f"{len(amps)} amplitudes is not a power of two")
        if normalize:
            amps = amps / np.linalg.norm(amps)
        elif abs(np.linalg.norm(amps) - 1) > 1e-6:
            raise DimensionError("amplitudes are not normalized")
        return StateVector(n, amps)

    def random_state(self, n: int, rng: RngStream) -> StateVector:
        _check_cap(n)
        return StateVector(n, rng.unit_vector(1 << n))

    def tensor(self, a: StateVector, b: StateVector) -> StateVector:
        _check_cap(a.n_qubits + b.n_qubits)
        return StateVector(a.n_qubits + b.n_qubits, np.kron(a.amplitudes, b.amplitudes), a.lineage + b.lineage)

    def apply_gate(self, s: StateVector, gate: str, q: int) -> StateVector:
        _check_qubit(s, q)
        if gate not in GATES:
            raise DimensionError(f"unknown gate {gate!r}")
        _count("gate")
        return StateVector(s.n_qubits, _apply_matrix(s, GATES[gate], q), s.lineage)

    def apply_unitary(self, s: StateVector, u: np.ndarray, q: int) -> StateVector:
        _check_qubit(s, q)
        if u.shape != (2, 2):
            raise DimensionError("single-qubit unitary must be 2x2")
        _count("gate")
        return StateVector(s.n_qubits, _apply_matrix(s, np.asarray(u, dtype=np.complex128), q), s.lineage)

    def apply_pauli(self, s: StateVector, q: int, x: int, z: int) -> StateVector:
        """Apply X^x Z^z to qubit q as a single counted operation."""
        _check_qubit(s, q)
        _count("gate")
        u = np.linalg.matrix_power(GATES["X"], x & 1) @ np.linalg.matrix_power(GATES["Z"], z & 1)
        return StateVector(s.n_qubits, _apply_matrix(s, u, q), s.lineage)

    def apply_pauli_string(self, s: StateVector, x_bits: Sequence[int], z_bits: Sequence[int]) -> StateVector:
        """Apply the tensor product of X^x[q] Z^z[q] over all qubits (one counted operation)."""
        n = s.n_qubits
        if len(x_bits) != n or len(z_bits) != n:
            raise DimensionError("Pauli string length differs from register size")
        _count("gate")
        index = np.arange(1 << n, dtype=np.int64)
        x_mask = 0
        parity = np.zeros(1 << n, dtype=np.int64)
        for q in range(n):
            shift = n - 1 - q
            if x_bits[q]:
                x_mask |= 1 << shift
            if z_bits[q]:
                parity ^= (index >> shift) & 1
        phased = s.amplitudes * np.where(parity == 1, -1.0, 1.0)
        out = np.empty_like(phased)
        out[index ^ x_mask] = phased
        return StateVector(n, out, s.lineage)

    def apply_cnot(self, s: StateVector, control: int, target: int) -> StateVector:
        _check_qubit(s, control)
        _check_qubit(s, target)
        if control == target:
            raise QubitIndexError("CNOT control and target must differ")
        _count("gate")
        psi = s.tensor().copy()
        sl = _bit_axis_slice(s.n_qubits, control, 1)
        axis = target if target < control else target - 1
        psi[sl] = np.flip(psi[sl], axis=axis).copy()
        return StateVector(s.n_qubits, psi.reshape(-1), s.lineage)

    def _collapse(self, s: StateVector, q: int, bit: int) -> tuple[float, np.ndarray]:
        psi = s.tensor().copy()
        psi[_bit_axis_slice(s.n_qubits, q, 1 - bit)] = 0
        prob = float(np.sum(np.abs(psi) ** 2))
        return prob, psi.reshape(-1)

    def measure(self, s: StateVector, q: int, basis: Basis, rng: RngStream) -> tuple[MeasOutcome, StateVector]:
        """
        Born-rule measurement; the measured qubit is left as |outcome>.

        Args:
            s: State
            q: Qubit index
            basis: Z or X (X measurement = H then Z)
            rng: Stream the outcome is sampled from

        Returns:
            Outcome and post-measurement state
        """
        _check_qubit(s, q)
        _count("measure")
        basis = Basis(basis)
        work = s if basis is Basis.Z else StateVector(s.n_qubits, _apply_matrix(s, GATES["H"], q), s.lineage)
        probs = work.probabilities().reshape((2,) * s.n_qubits)
        p1 = float(np.clip(np.sum(probs[_bit_axis_slice(s.n_qubits, q, 1)]), 0.0, 1.0))
        bit = 1 if rng.random() < p1 else 0
        prob, amps = self._collapse(work, q, bit)
        lineage = work.with_lineage(rng)
        return MeasOutcome(bit=bit, basis=basis), StateVector(s.n_qubits, amps / np.sqrt(prob), lineage)

    def project(self, s: StateVector, q: int, bit: int, basis: Basis = Basis.Z) -> tuple[float, StateVector]:
        """Force outcome ``bit``; returns its Born probability and the renormalized state."""
        _check_qubit(s, q)
        _count("measure")
        basis = Basis(basis)
        work = s if basis is Basis.Z else StateVector(s.n_qubits, _apply_matrix(s, GATES["H"], q), s.lineage)
        prob, amps = self._collapse(work, q, bit)
        if prob < TOLERANCE:
            raise ProjectionError(f"outcome {bit} on qubit {q} has probability {prob:.3g}")
        return prob, StateVector(s.n_qubits, amps / np.sqrt(prob), s.lineage)

    def bell_measure(self, s: StateVector, q1: int, q2: int, rng: RngStream) -> tuple[tuple[int, int], StateVector]:
        """
        Bell measurement of (q1, q2): CNOT q1->q2, X-measure q1 (b), Z-measure q2 (a).

        The teleported receiver is corrected by X^a Z^b.
        """
        if q1 == q2:
            raise QubitIndexError("Bell measurement needs two distinct qubits")
        s = self.apply_cnot(s, q1, q2)
        out_b, s = self.measure(s, q1, Basis.X, rng)
        out_a, s = self.measure(s, q2, Basis.Z, rng)
        return (out_a.bit, out_b.bit), s

    def make_epr(self, s: Optional[StateVector] = None) -> tuple[int, int, StateVector]:
        """Append |Phi+> on two new qubits; returns their indices."""
        s = s if s is not None else self.new_register(0)
        n = s.n_qubits
        s = self.tensor(s, self.new_register(2))
        s = self.apply_gate(s, "H", n)
        s = self.apply_cnot(s, n, n + 1)
        return n, n + 1, s

    def fidelity(self, a: StateVector, b: StateVector) -> float:
        if a.n_qubits != b.n_qubits:
            raise DimensionError(f"fidelity between {a.n_qubits} and {b.n_qubits} qubits")
        return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))

    def permute_qubits(self, s: StateVector, perm: Sequence[int], offset: int = 0) -> StateVector:
        """
        Relabel a contiguous block of qubits.

        Input qubit ``offset + j`` moves to position ``offset + perm[j]``.
        """
        k = len(perm)
        if offset < 0 or offset + k > s.n_qubits:
            raise DimensionError(f"permutation of {k} qubits at offset {offset} exceeds {s.n_qubits}-qubit register")
        if sorted(int(p) for p in perm) != list(range(k)):
            raise DimensionError("not a permutation")
        axes = list(range(s.n_qubits))
        for j, p in enumerate(perm):
            axes[offset + int(p)] = offset + j
        out = np.transpose(s.tensor(), axes)
        return StateVector(s.n_qubits, np.ascontiguousarray(out).reshape(-1), s.lineage)

    def discard_qubit(self, s: StateVector, q: int) -> StateVector:
        """Remove a qubit that is in a definite computational basis state."""
        _check_qubit(s, q)
        psi = s.tensor()
        zero = psi[_bit_axis_slice(s.n_qubits, q, 0)]
        one = psi[_bit_axis_slice(s.n_qubits, q, 1)]
        if np.sum(np.abs(one) ** 2) < TOLERANCE:
            rest = zero
        elif np.sum(np.abs(zero) ** 2) < TOLERANCE:
            rest = one
        else:
            raise ProjectionError(f"qubit {q} is not in a computational basis state")
        rest = np.asarray(rest).reshape(-1)
        return StateVector(s.n_qubits - 1, rest / np.linalg.norm(rest), s.lineage)

    def density_matrix(self, s: StateVector) -> np.ndarray:
        return np.outer(s.amplitudes, s.amplitudes.conj())

    def pauli_twirl_average(self, s: StateVector) -> np.ndarray:
        """Average of X^a Z^b rho (X^a Z^b)^dagger over all 4^n Pauli keys."""
        n = s.n_qubits
        rho = np.zeros((1 << n, 1 << n), dtype=np.complex128)
        for key in range(1 << (2 * n)):
            x_bits = [(key >> (2 * q)) & 1 for q in range(n)]
            z_bits = [(key >> (2 * q + 1)) & 1 for q in range(n)]
            rho += self.density_matrix(self.apply_pauli_string(s, x_bits, z_bits))
        return rho / (1 << (2 * n))

    def dump_state(self, s: StateVector) -> str:
        """Debug dump: "index re im" per amplitude, 17 significant digits."""
        return "".join(f"{i} {a.real:.17g} {a.imag:.17g}\n" for i, a in enumerate(s.amplitudes))

    def basis_bits(self, s: StateVector) -> Optional[list[int]]:
        """Bits of s if it is a computational basis state (up to phase), else None."""
        probs = s.probabilities()
        idx = int(np.argmax(probs))
        if probs[idx] < 1 - TOLERANCE:
            return None
        return [(idx >> (s.n_qubits - 1 - q)) & 1 for q in range(s.n_qubits)]

    def apply_sequence(self, s: StateVector, ops: Iterable[tuple]) -> StateVector:
        """Apply ("CNOT", c, t) / (gate, q) tuples in order."""
        for op in ops:
            if op[0] == "CNOT":
                s = self.apply_cnot(s, op[1], op[2])
            else:
                s = self.apply_gate(s, op[0], op[1])
        return s


# Global instance
qsim = QuantumSimulator()
