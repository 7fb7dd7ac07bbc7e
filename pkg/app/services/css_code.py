"""
Concatenated Steane code: quantum encode/decode at level 1, classical decoding
and codeword sampling at any level.
"""

import itertools
import logging
from functools import lru_cache
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from app.exceptions import CapacityError, CodeError, DimensionError
from app.services.rng_service import RngStream
from app.services.statevector import StateVector, qsim, qubit_cap

logger = logging.getLogger("app.codes")

PARITY_CHECKS = np.array(
    [
        [1, 0, 1, 0, 1, 0, 1],
        [0, 1, 1, 0, 0, 1, 1],
        [0, 0, 0, 1, 1, 1, 1],
    ],
    dtype=np.uint8,
)

# Hamming [7,4,3] codewords; even weight = logical 0, odd weight = logical 1
HAMMING_CODEWORDS = np.array(
    [c for c in itertools.product((0, 1), repeat=7) if not np.any(PARITY_CHECKS @ np.array(c) % 2)],
    dtype=np.uint8,
)
CODEWORD_PARITY = HAMMING_CODEWORDS.sum(axis=1) % 2
CODEWORDS_BY_LOGICAL = (HAMMING_CODEWORDS[CODEWORD_PARITY == 0], HAMMING_CODEWORDS[CODEWORD_PARITY == 1])

DATA_POSITION = 2
ANCILLAS = (0, 1, 3, 4, 5, 6)

# input on qubit 2; the first two CNOTs prepare the odd codeword {2,4,5}, each
# pivot then adds one parity-check row in superposition
ENCODER: tuple[tuple, ...] = (
    ("CNOT", 2, 4),
    ("CNOT", 2, 5),
    ("H", 0),
    ("CNOT", 0, 2),
    ("CNOT", 0, 4),
    ("CNOT", 0, 6),
    ("H", 1),
    ("CNOT", 1, 2),
    ("CNOT", 1, 5),
    ("CNOT", 1, 6),
    ("H", 3),
    ("CNOT", 3, 4),
    ("CNOT", 3, 5),
    ("CNOT", 3, 6),
)
DECODER: tuple[tuple, ...] = tuple(reversed(ENCODER))


class SyndromeReport(BaseModel):
    """What the quantum decoder saw and did."""

    model_config = ConfigDict(frozen=True)

    pattern: tuple[int, ...]
    correction: Optional[tuple[int, int]] = None
    correctable: bool = True


def _propagate(x: np.ndarray, z: np.ndarray, ops) -> None:
    for op in ops:
        if op[0] == "H":
            q = op[1]
            x[q], z[q] = z[q], x[q]
        else:
            c, t = op[1], op[2]
            x[t] ^= x[c]
            z[c] ^= z[t]


@lru_cache(maxsize=1)
def syndrome_table() -> dict[tuple[int, ...], tuple[int, int]]:
    """Ancilla pattern after decoding -> logical (x, z) left on the data qubit, for errors of X- and Z-weight <= 1."""
    table: dict[tuple[int, ...], tuple[int, int]] = {}
    for x_pos, z_pos in itertools.product((None, *range(7)), repeat=2):
        x = np.zeros(7, dtype=np.uint8)
        z = np.zeros(7, dtype=np.uint8)
        if x_pos is not None:
            x[x_pos] = 1
        if z_pos is not None:
            z[z_pos] = 1
        _propagate(x, z, DECODER)
        pattern = tuple(int(x[a]) for a in ANCILLAS)
        effect = (int(x[DATA_POSITION]), int(z[DATA_POSITION]))
        if table.setdefault(pattern, effect) != effect:
            raise CodeError(f"ambiguous syndrome pattern {pattern}")
    return table


class CssCode:
    """Self-dual [[7^L, 1, 3^L]] concatenated Steane code."""

    def __init__(self, level: int = 1):
        if level < 1:
            raise CodeError("concatenation level must be at least 1")
        self.level = level
        self.m = 7**level
        self.d = 3**level
        self.d_c = (self.d - 1) // 2
        self.logical_x = np.ones(self.m, dtype=np.uint8)
        self.logical_z = np.ones(self.m, dtype=np.uint8)

    def __repr__(self) -> str:
        return f"CssCode(level={self.level}, m={self.m}, d={self.d}, d_c={self.d_c})"

    def __eq__(self, other) -> bool:
        return isinstance(other, CssCode) and other.level == self.level

    def __hash__(self) -> int:
        return hash(("CssCode", self.level))

    # classical side

    def _costs(self, bits: np.ndarray) -> np.ndarray:
        if bits.shape[0] == 1:
            return np.array([bits[0], 1 - bits[0]], dtype=np.int64)
        sub = np.array([self._costs(row) for row in bits.reshape(7, -1)])
        totals = sub[np.arange(7), HAMMING_CODEWORDS].sum(axis=1)
        return np.array([totals[CODEWORD_PARITY == 0].min(), totals[CODEWORD_PARITY == 1].min()])

    def classical_decode(self, bits) -> int:
        """
        Logical bit of the nearest codeword.

        Args:
            bits: m measured bits (any int sequence)

        Returns:
            0 or 1
        """
        arr = np.asarray(bits, dtype=np.int64).reshape(-1)
        if arr.shape[0] != self.m:
            raise DimensionError(f"expected {self.m} bits, got {arr.shape[0]}")
        costs = self._costs(arr)
        return int(costs[1] < costs[0])

    def distance_to_code(self, bits) -> int:
        """Weight of the smallest error that maps ``bits`` onto a codeword."""
        return int(self._costs(np.asarray(bits, dtype=np.int64).reshape(-1)).min())

    def sample_codeword(self, logical: int, rng: RngStream, level: Optional[int] = None) -> np.ndarray:
        """Uniform codeword of the given logical value (the support of a measured |logical>)."""
        level = self.level if level is None else level
        options = CODEWORDS_BY_LOGICAL[logical & 1]
        word = options[int(rng.integers(0, len(options)))]
        if level == 1:
            return word.copy()
        return np.concatenate([self.sample_codeword(int(b), rng, level - 1) for b in word])

    def is_codeword(self, bits) -> bool:
        return self.distance_to_code(bits) == 0

    # quantum side (level 1 only)

    def _require_quantum(self) -> None:
        if self.m > qubit_cap() or self.level != 1:
            raise CapacityError(f"quantum encoding of m={self.m} qubits is not simulated")

    def encode(self, s: StateVector) -> StateVector:
        """Encode a single-qubit state into m qubits."""
        self._require_quantum()
        if s.n_qubits != 1:
            raise DimensionError("encode expects a single-qubit state")
        block = qsim.tensor(qsim.tensor(qsim.new_register(2), s), qsim.new_register(4))
        return qsim.apply_sequence(block, ENCODER)

    def encode_ops(self, offset: int = 0) -> list[tuple]:
        return [(op[0], *(q + offset for q in op[1:])) for op in ENCODER]

    def decode_at(self, s: StateVector, offset: int, rng: RngStream) -> tuple[StateVector, SyndromeReport]:
        """
        Decode the block occupying qubits [offset, offset + m) of a larger state.

        The ancillas are measured and removed; the logical qubit stays at ``offset``.
        """
        self._require_quantum()
        if offset < 0 or offset + self.m > s.n_qubits:
            raise DimensionError(f"block at {offset} does not fit a {s.n_qubits}-qubit state")
        s = qsim.apply_sequence(s, [(op[0], *(q + offset for q in op[1:])) for op in DECODER])
        pattern = []
        for a in ANCILLAS:
            outcome, s = qsim.measure(s, offset + a, "Z", rng)
            pattern.append(outcome.bit)
        key = tuple(pattern)
        effect = syndrome_table().get(key)
        if effect is None:
            logger.info(f"Uncorrectable syndrome pattern={key}")
            report = SyndromeReport(pattern=key, correction=None, correctable=False)
        else:
            if effect != (0, 0):
                s = qsim.apply_pauli(s, offset + DATA_POSITION, effect[0], effect[1])
            report = SyndromeReport(pattern=key, correction=effect)
        for a in sorted(ANCILLAS, reverse=True):
            s = qsim.discard_qubit(s, offset + a)
        return s, report

    def decode(self, block: StateVector, rng: RngStream) -> tuple[StateVector, SyndromeReport]:
        """Correct and extract the logical qubit of an m-qubit block."""
        if block.n_qubits != self.m:
            raise DimensionError(f"decode expects {self.m} qubits, got {block.n_qubits}")
        return self.decode_at(block, 0, rng)


@lru_cache(maxsize=4)
def get_code(level: int = 1) -> CssCode:
    return CssCode(level)
