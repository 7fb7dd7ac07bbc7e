"""
Basic quantum value types shared by the simulator and the schemes.
"""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field


class Basis(str, Enum):
    """Measurement basis: computational (Z) or Hadamard (X)."""

    Z = "Z"
    X = "X"


class MeasOutcome(BaseModel):
    """Outcome of a single-qubit measurement."""

    model_config = ConfigDict(frozen=True)

    bit: int = Field(ge=0, le=1)
    basis: Basis = Basis.Z
