"""
Trap-code blocks over a logical workspace.

A block stands for 3m physical qubits laid out (before permutation) as m
code qubits, m |0> traps and m |+> traps. The register keeps the logical
qubit in the workspace and, per block, the permutation, the physical Pauli
frame and, once measured, the 3m-bit record. Transversal CNOT and
measurement act on the logical qubit and move the frame the way the
physical gates would; Pauli attacks are folded into the frame.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from app.exceptions import DimensionError, SlotError
from app.models.quantum import Basis
from app.models.trap import as_bits
from app.services.css_code import CssCode
from app.services.rng_service import RngStream
from app.services.statevector import StateVector, qsim
from app.services.workspace import QubitWorkspace

logger = logging.getLogger("app.trapcode")

_block_ids = itertools.count(1)


def permute_bits(values: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """Layout position j goes to physical position pi[j]."""
    out = np.empty_like(values)
    out[pi] = values
    return out


def unpermute_bits(values: np.ndarray, pi: np.ndarray) -> np.ndarray:
    return values[pi]


def logical_mask(pi: np.ndarray, m: int) -> np.ndarray:
    """permute_pi(1^m 0^2m): physical positions of the code qubits."""
    layout = np.zeros(3 * m, dtype=np.uint8)
    layout[:m] = 1
    return permute_bits(layout, pi)


@dataclass
class TrapBlock:
    block_id: int
    handle: Optional[int]
    perm: np.ndarray
    x_frame: np.ndarray
    z_frame: np.ndarray
    label: str = ""
    record: Optional[np.ndarray] = None
    record_basis: Optional[Basis] = None
    opened: bool = False

    @property
    def measured(self) -> bool:
        return self.record is not None


@dataclass
class OpenResult:
    accepted: bool
    reason: str = ""
    logical_pauli: tuple[int, int] = (0, 0)
    flagged: list[str] = field(default_factory=list)


class BlockRegister:
    """Workspace plus the trap blocks living on it."""

    def __init__(self, code: CssCode):
        self.code = code
        self.workspace = QubitWorkspace()
        self.blocks: dict[int, TrapBlock] = {}

    @property
    def m(self) -> int:
        return self.code.m

    def block(self, block_id: int) -> TrapBlock:
        if block_id not in self.blocks:
            raise SlotError(f"unknown block {block_id}")
        return self.blocks[block_id]

    def live_block(self, block_id: int) -> TrapBlock:
        blk = self.block(block_id)
        if blk.measured or blk.handle is None:
            raise SlotError(f"block {block_id} ({blk.label}) was already measured")
        return blk

    def add_block(self, handle: int, perm, x_pad, z_pad, label: str = "") -> int:
        """Wrap an existing logical qubit in a trap block with the given key material."""
        if handle not in self.workspace:
            raise SlotError(f"qubit handle {handle} is not in this register")
        size = 3 * self.m
        perm = np.asarray(perm, dtype=np.int64)
        if perm.shape != (size,):
            raise DimensionError(f"permutation must have {size} entries")
        block_id = next(_block_ids)
        self.blocks[block_id] = TrapBlock(
            block_id=block_id,
            handle=handle,
            perm=perm,
            x_frame=as_bits(x_pad, size).copy(),
            z_frame=as_bits(z_pad, size).copy(),
            label=label,
        )
        return block_id

    def restore_block(self, blk: TrapBlock) -> int:
        """Insert a block read back from its serialized form under a fresh id."""
        if blk.handle is not None and blk.handle not in self.workspace:
            raise SlotError(f"qubit handle {blk.handle} is not in this register")
        block_id = next(_block_ids)
        blk.block_id = block_id
        self.blocks[block_id] = blk
        return block_id

    def add_state(self, state: StateVector, perm, pads: Sequence[tuple], labels: Sequence[str] = ()) -> list[int]:
        """Add an n-qubit logical state and wrap each qubit in a block."""
        handles = self.workspace.add(state)
        if len(pads) != len(handles):
            raise DimensionError("one (x, z) pad pair per qubit is required")
        labels = list(labels) or [""] * len(handles)
        return [self.add_block(h, perm, x, z, label) for h, (x, z), label in zip(handles, pads, labels)]

    def merge(self, other: "BlockRegister") -> None:
        if other.code != self.code:
            raise DimensionError("registers use different codes")
        self.workspace.merge(other.workspace)
        self.blocks.update(other.blocks)
        other.blocks = {}

    # adversarial and homomorphic actions

    def apply_physical_pauli(self, block_id: int, x_bits=None, z_bits=None) -> None:
        """Physical Pauli on the block's 3m qubits (or on its record, once measured)."""
        blk = self.block(block_id)
        size = 3 * self.m
        x = as_bits(x_bits if x_bits is not None else np.zeros(size), size)
        z = as_bits(z_bits if z_bits is not None else np.zeros(size), size)
        if blk.measured:
            flip = x if blk.record_basis is Basis.Z else z
            blk.record = blk.record ^ flip
            return
        blk.x_frame ^= x
        blk.z_frame ^= z

    def transversal_cnot(self, control: int, target: int) -> None:
        """Physical CNOT between all 3m position pairs of two blocks sharing a permutation."""
        c = self.live_block(control)
        t = self.live_block(target)
        if control == target:
            raise SlotError("CNOT needs two different blocks")
        if not np.array_equal(c.perm, t.perm):
            raise DimensionError(f"blocks {c.label} and {t.label} use different permutations")
        self.workspace.apply_cnot(c.handle, t.handle)
        t.x_frame ^= c.x_frame
        c.z_frame ^= t.z_frame

    def measure_block(self, block_id: int, basis: Basis, rng: RngStream) -> np.ndarray:
        """
        Measure all 3m physical qubits in the given basis.

        Returns:
            The 3m outcome bits (also kept as the block's record)
        """
        blk = self.live_block(block_id)
        basis = Basis(basis)
        m = self.m
        logical = self.workspace.measure(blk.handle, basis, rng)
        layout = np.zeros(3 * m, dtype=np.uint8)
        layout[:m] = self.code.sample_codeword(logical, rng)
        if basis is Basis.Z:
            layout[2 * m :] = rng.bits(m)
        else:
            layout[m : 2 * m] = rng.bits(m)
        frame = blk.x_frame if basis is Basis.Z else blk.z_frame
        blk.record = permute_bits(layout, blk.perm) ^ frame
        blk.record_basis = basis
        blk.handle = None
        logger.debug(f"Block measured block={blk.label or block_id} basis={basis.value}")
        return blk.record.copy()

    def open_block(self, block_id: int, x_key, z_key) -> OpenResult:
        """
        Remove the pad, check both trap families and undo the logical Pauli left by the key difference.

        The logical qubit stays in the workspace for extraction.
        """
        blk = self.live_block(block_id)
        m = self.m
        rx = unpermute_bits(blk.x_frame ^ as_bits(x_key, 3 * m), blk.perm)
        rz = unpermute_bits(blk.z_frame ^ as_bits(z_key, 3 * m), blk.perm)
        lx = self.code.classical_decode(rx[:m])
        lz = self.code.classical_decode(rz[:m])
        self.workspace.apply_pauli(blk.handle, lx, lz)
        blk.x_frame = np.zeros(3 * m, dtype=np.uint8)
        blk.z_frame = np.zeros(3 * m, dtype=np.uint8)
        blk.opened = True
        flagged = []
        if np.any(rx[m : 2 * m]):
            flagged.append("zero-trap")
        if np.any(rz[2 * m :]):
            flagged.append("plus-trap")
        if flagged:
            return OpenResult(False, f"trap triggered in {blk.label or block_id}: {','.join(flagged)}", (lx, lz), flagged)
        return OpenResult(True, "", (lx, lz))

    def extract(self, block_ids: Sequence[int], rng: Optional[RngStream] = None) -> StateVector:
        handles = [self.live_block(b).handle for b in block_ids]
        state = self.workspace.extract(handles, rng)
        for b in block_ids:
            self.blocks[b].handle = None
        return state

    def discard_block(self, block_id: int, rng: RngStream) -> None:
        blk = self.block(block_id)
        if blk.handle is not None:
            self.workspace.discard([blk.handle], rng)
            blk.handle = None

    def materialize(self, block_id: int) -> StateVector:
        """Explicit 3m-qubit physical state of a block whose logical qubit is unentangled."""
        blk = self.live_block(block_id)
        m = self.m
        logical = self.workspace.peek([blk.handle])
        state = self.code.encode(logical)
        state = qsim.tensor(state, qsim.new_register(2 * m, "0" * m + "+" * m))
        state = qsim.permute_qubits(state, blk.perm)
        return qsim.apply_pauli_string(state, blk.x_frame, blk.z_frame)
