"""
Keys and ciphertexts of the verifiable scheme.

Every classical value the server sees travels as a MAC-signed record:

- ``keys``: canonical JSON ``{"pi": <Enc_pk0(pi)>, "pks": [<pk_0>, ..., <pk_t>]}``
- ``pad:<block>``: Enc(x) and Enc(z) of one trap block, newline-joined
- ``gadget:<i>``: Enc_pk_i(g_i), Enc_pk_i(pi_i) and Enc_pk_i(sk_{i-1})
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.exceptions import HomomorphicError
from app.models.crypto import HeCiphertext, HeKeySet, HePublicKey, MacKey, SignedMessage, split_ciphertexts
from app.services.block_register import BlockRegister

MAX_BUDGET = 8


class SchemeVariant(str, Enum):
    """The scheme and its two side-channel hybrids."""

    TRAPTP = "traptp"
    PRIME = "prime"
    DOUBLE_PRIME = "double-prime"


class SchemeParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    level: int = Field(default=1, ge=1, le=2)
    t: int = Field(default=0, ge=0, le=MAX_BUDGET)
    p: int = Field(default=0, ge=0, le=MAX_BUDGET)
    h: int = Field(default=0, ge=0, le=MAX_BUDGET)

    @property
    def budgets(self) -> tuple[int, int, int]:
        return self.t, self.p, self.h


def pad_label(block: str) -> str:
    return f"pad:{block}"


def gadget_label(i: int) -> str:
    return f"gadget:{i}"


def keys_message(pi_ct: HeCiphertext, pks: tuple[HePublicKey, ...]) -> bytes:
    data = {"pi": pi_ct.to_text(), "pks": [pk.to_text() for pk in pks]}
    return json.dumps(data, sort_keys=True, separators=(",", ":")).encode("ascii")


def parse_keys_message(message: bytes) -> tuple[HeCiphertext, list[str]]:
    try:
        data = json.loads(message.decode("ascii"))
        pi_ct = HeCiphertext.from_text(data["pi"])
        pks = [str(pk) for pk in data["pks"]]
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as e:
        raise HomomorphicError(f"keys record is malformed: {e}") from e
    return pi_ct, pks


def record_outputs(label: str, message: bytes) -> list[HeCiphertext]:
    """Ciphertexts carried by a signed record, in log output order."""
    if label == "keys":
        return [parse_keys_message(message)[0]]
    if label.startswith("pad:"):
        return split_ciphertexts(message, 2)
    if label.startswith("gadget:"):
        return split_ciphertexts(message, 3)
    raise HomomorphicError(f"unknown signed record label {label!r}")


@dataclass(frozen=True, eq=False)
class SecretKey:
    """(pi, MAC key, sk_0..sk_t, pk_0)."""

    params: SchemeParams
    pi: np.ndarray
    mac_key: MacKey
    he_keys: HeKeySet

    @property
    def pk0(self) -> HePublicKey:
        return self.he_keys.pk(0)

    @property
    def size(self) -> int:
        return len(self.pi)


@dataclass(eq=False)
class EvalKey:
    """
    Quantum evaluation key: signed keys record, magic states and gadgets.

    ``blocks`` maps resource names (mP1, mT1, mH1a, g1.0, ...) to block ids of
    ``register``; ``pads`` holds the signed pad record of each resource by label.
    """

    params: SchemeParams
    keys: SignedMessage
    register: BlockRegister
    blocks: dict[str, int] = field(default_factory=dict)
    pads: dict[str, SignedMessage] = field(default_factory=dict)
    gadgets: dict[int, SignedMessage] = field(default_factory=dict)
    consumed: bool = False

    def public_keys(self) -> tuple[HePublicKey, ...]:
        """pk_0..pk_t from the keys record, as evaluation keys."""
        _, texts = parse_keys_message(self.keys.message)
        keys = []
        for text in texts:
            backend, epoch, key_id = text.split(":")
            keys.append(HePublicKey(backend=backend, epoch=int(epoch), key_id=key_id))
        return tuple(keys)


@dataclass(eq=False)
class VqfheCiphertext:
    """
    Trap blocks plus their encrypted pads.

    A fresh ciphertext carries one signed pad record per wire; an evaluated
    one carries the claimed final pad ciphertexts of its quantum outputs.
    """

    register: BlockRegister
    wires: dict[int, str]
    blocks: dict[str, int]
    pads: dict[str, SignedMessage] = field(default_factory=dict)
    final_pads: dict[int, tuple[HeCiphertext, HeCiphertext]] = field(default_factory=dict)
    epoch: int = 0

    @property
    def n_wires(self) -> int:
        return len(self.wires)

    @property
    def evaluated(self) -> bool:
        return not self.pads

    def block_id(self, wire: int) -> int:
        return self.blocks[self.wires[wire]]


@dataclass
class SideChannel:
    """
    Values KeyGen and Enc hand straight to VerDec in the hybrid variants.

    ``signed`` holds each record's message by label, ``plaintexts`` the
    plaintexts of the ciphertexts inside it.
    """

    signed: dict[str, bytes] = field(default_factory=dict)
    plaintexts: dict[str, tuple[bytes, ...]] = field(default_factory=dict)

    def add(self, record: SignedMessage, plaintexts: tuple[bytes, ...]) -> None:
        self.signed[record.label] = record.message
        self.plaintexts[record.label] = plaintexts

    def merge(self, other: Optional["SideChannel"]) -> "SideChannel":
        if other is not None:
            self.signed.update(other.signed)
            self.plaintexts.update(other.plaintexts)
        return self
