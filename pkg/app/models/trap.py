"""
Trap-code key and result types.
"""

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

from app.exceptions import DimensionError
from app.models.quantum import Basis

if TYPE_CHECKING:
    from app.services.statevector import StateVector


def as_bits(values, length: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(values, dtype=np.uint8).reshape(-1)
    if np.any(arr > 1):
        raise DimensionError("bit arrays may only hold 0 and 1")
    if length is not None and arr.shape[0] != length:
        raise DimensionError(f"expected {length} bits, got {arr.shape[0]}")
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TrapKey:
    """Permutation of 3m positions plus one (x, z) pad pair per slot."""

    pi: np.ndarray
    x: tuple[np.ndarray, ...]
    z: tuple[np.ndarray, ...]

    def __post_init__(self):
        size = len(self.pi)
        if sorted(int(p) for p in self.pi) != list(range(size)):
            raise DimensionError("pi is not a permutation")
        if len(self.x) != len(self.z):
            raise DimensionError("x and z pad lists differ in length")
        object.__setattr__(self, "pi", _frozen(np.asarray(self.pi, dtype=np.int64)))
        object.__setattr__(self, "x", tuple(_frozen(as_bits(v, size)) for v in self.x))
        object.__setattr__(self, "z", tuple(_frozen(as_bits(v, size)) for v in self.z))

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def size(self) -> int:
        return len(self.pi)

    def with_pads(self, x, z) -> "TrapKey":
        return TrapKey(self.pi, tuple(x), tuple(z))

    def to_bytes(self) -> bytes:
        parts = [np.asarray(self.pi, dtype=">u4").tobytes()]
        parts.extend(np.packbits(v).tobytes() for v in self.x)
        parts.extend(np.packbits(v).tobytes() for v in self.z)
        return len(self.pi).to_bytes(4, "big") + len(self.x).to_bytes(4, "big") + b"".join(parts)

    def __eq__(self, other) -> bool:
        return isinstance(other, TrapKey) and self.to_bytes() == other.to_bytes()

    def __hash__(self) -> int:
        return hash(self.to_bytes())


@dataclass
class MeasurementCheck:
    """Outcome of checking one measured block."""

    bit: int
    accepted: bool
    reason: str = ""


@dataclass
class VerDecResult:
    """Verified decryption output: quantum outputs, classical outputs and the verdict."""

    accepted: bool
    state: "StateVector"
    bits: dict[int, int] = field(default_factory=dict)
    quantum_wires: tuple[int, ...] = ()
    ver_steps: int = 0
    dec_operations: int = 0
    reason: str = ""


@dataclass
class TrapRecord:
    """Classical record of a measured block."""

    bits: np.ndarray
    basis: Basis
