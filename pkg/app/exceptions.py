"""
Exception hierarchy for the TrapTP simulator.

Verification failures are reported through result objects; the exceptions
below signal misuse of an API or a broken precondition.
"""


class TrapTPError(Exception):
    """Base class for all simulator errors."""


class CapacityError(TrapTPError):
    """Register would exceed the configured qubit cap."""


class QubitIndexError(TrapTPError, IndexError):
    """Qubit index out of range or repeated where distinct indices are required."""


class DimensionError(TrapTPError, ValueError):
    """Shapes or sizes of two operands do not agree."""


class CodeError(TrapTPError):
    """Error-correcting code misuse (wrong block size, ambiguous syndrome table)."""


class SlotError(TrapTPError):
    """Ciphertext slot reused, missing or already measured."""


class CircuitError(TrapTPError, ValueError):
    """Malformed circuit description or unsupported gate."""


class BudgetError(TrapTPError):
    """Circuit needs more magic states or gadgets than the evaluation key holds."""


class HomomorphicError(TrapTPError):
    """Classical homomorphic evaluation failed (unknown function, bad inputs)."""


class EpochError(HomomorphicError):
    """Ciphertext epoch does not match the key or the operation."""


class GadgetError(TrapTPError):
    """Garden-hose gadget reused or not constructible for the backend."""


class LogFormatError(TrapTPError, ValueError):
    """Computation log text or entry does not follow the log format."""


class AdversaryContractError(TrapTPError):
    """An adversary stage returned something the game cannot use."""


class TokenReuseError(TrapTPError):
    """A single-use token was queried a second time."""


class ProtocolError(TrapTPError):
    """Wire protocol violation (bad frame, version mismatch, truncation)."""


class ConfigError(TrapTPError, ValueError):
    """Invalid configuration value."""


class ProjectionError(TrapTPError, ValueError):
    """Forced measurement outcome has zero probability, or a qubit is not classical."""
