"""
Security-game models: options, per-trial records and what the final
adversary stage gets to see.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.models.traptp import MAX_BUDGET

if TYPE_CHECKING:
    from app.models.circuit import CircuitDesc
    from app.services.statevector import StateVector


class GameKind(str, Enum):
    IND_VER = "ind-ver"
    IND_VER_2 = "ind-ver-2"
    HYBRID = "hybrid"


class SchemeName(str, Enum):
    """Schemes a game can be played against."""

    TRAPCODE = "trapcode"
    TRAPTP = "traptp"
    PRIME = "prime"
    DOUBLE_PRIME = "double-prime"


class GameOptions(BaseModel):
    """
    Knobs of one game run.

    The one-round game evaluates ``circuit``; the two-round game encrypts one
    register per round and evaluates ``two_round_circuit`` on both.
    """

    model_config = ConfigDict(frozen=True)

    # Circuits
    circuit: str = Field(default="X 0", description="Circuit the honest evaluator applies")
    n_wires: int = Field(default=1, ge=1, le=4, description="Plaintext qubits chosen by the adversary")
    two_round_circuit: str = Field(default="X 0; X 1", description="Circuit over both rounds' wires")
    first_wires: int = Field(default=1, ge=1, le=3, description="Qubits encrypted in the first round")
    second_wires: int = Field(default=1, ge=1, le=3, description="Qubits encrypted in the second round")

    # Scheme parameters
    level: int = Field(default=1, ge=1, le=2, description="Concatenation level of the Steane code")
    budget_t: int = Field(default=0, ge=0, le=MAX_BUDGET, description="Extra T supply beyond the circuit's needs")
    budget_p: int = Field(default=0, ge=0, le=MAX_BUDGET, description="Extra P supply beyond the circuit's needs")
    budget_h: int = Field(default=0, ge=0, le=MAX_BUDGET, description="Extra H supply beyond the circuit's needs")

    # Adversary parameters
    weight: int = Field(default=1, ge=1, le=21, description="Pauli weight of the fixed-weight attacker")
    basis: str = Field(default="X", pattern="^[XZ]$", description="Pauli kind of the weighted attacks")


class TrialRecord(BaseModel):
    """One row of the trial CSV."""

    model_config = ConfigDict(frozen=True)

    trial: int = Field(ge=0, description="Trial index within the experiment")
    r: int = Field(ge=0, le=1, description="Challenger's coin")
    r_prime: int = Field(ge=0, le=1, description="Adversary's guess")
    accept: bool = Field(description="Verified decryption accepted")
    detected: bool = Field(description="A deviation was made and rejected")

    @property
    def win(self) -> bool:
        return self.r == self.r_prime


@dataclass
class Evaluated:
    """What the evaluation stage hands back: ciphertext, claimed circuit and log text."""

    ct: Any
    circuit: "CircuitDesc"
    log: str = ""
    tampered: bool = False


@dataclass
class Delivered:
    """Input of the guessing stage: the (possibly swapped back) output and the acc/rej wire."""

    accepted: bool
    state: "StateVector"
    bits: dict[int, int] = field(default_factory=dict)
    reason: str = ""


@dataclass
class TrialOutcome:
    """Full record of one trial, kept by tests that inspect the wiring."""

    record: TrialRecord
    delivered: Delivered
    plaintext: Optional["StateVector"] = None
