"""
Classical key and ciphertext models: homomorphic-encryption keys and
ciphertexts, MAC keys and signed messages.
"""

import re
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from app.exceptions import HomomorphicError

_CT_PATTERN = re.compile(r"^([a-z0-9-]+)\|(\d+)\|([0-9a-f]{16})\|([0-9a-f]{16})\|((?:[0-9a-f]{2})*)$")


class HePublicKey(BaseModel):
    """Public (and evaluation) key of one epoch."""

    model_config = ConfigDict(frozen=True)

    backend: str
    epoch: int = Field(ge=0)
    key_id: str = Field(pattern=r"^[0-9a-f]{16}$")

    def to_text(self) -> str:
        return f"{self.backend}:{self.epoch}:{self.key_id}"


class HeKeyPair(BaseModel):
    """Key material of one epoch; ``secret`` never leaves the client."""

    model_config = ConfigDict(frozen=True)

    backend: str
    epoch: int = Field(ge=0)
    key_id: str = Field(pattern=r"^[0-9a-f]{16}$")
    secret: bytes

    @property
    def pk(self) -> HePublicKey:
        return HePublicKey(backend=self.backend, epoch=self.epoch, key_id=self.key_id)

    @property
    def evk(self) -> HePublicKey:
        return self.pk


class HeKeySet(BaseModel):
    """Key pairs for epochs 0..t."""

    model_config = ConfigDict(frozen=True)

    pairs: tuple[HeKeyPair, ...]

    @property
    def t(self) -> int:
        return len(self.pairs) - 1

    def pair(self, epoch: int) -> HeKeyPair:
        if not 0 <= epoch < len(self.pairs):
            raise HomomorphicError(f"no key set for epoch {epoch}")
        return self.pairs[epoch]

    def pk(self, epoch: int) -> HePublicKey:
        return self.pair(epoch).pk

    def public(self) -> tuple[HePublicKey, ...]:
        return tuple(p.pk for p in self.pairs)


class HeCiphertext(BaseModel):
    """
    Classical ciphertext: backend tag, epoch, key id, nonce and payload.

    The canonical text form is ``backend|epoch|key_id|nonce|payload-hex``.
    """

    model_config = ConfigDict(frozen=True)

    backend: str
    epoch: int = Field(ge=0)
    key_id: str = Field(pattern=r"^[0-9a-f]{16}$")
    nonce: int = Field(ge=0, lt=2**64)
    payload: bytes = b""

    def to_text(self) -> str:
        return f"{self.backend}|{self.epoch}|{self.key_id}|{self.nonce:016x}|{self.payload.hex()}"

    def to_bytes(self) -> bytes:
        return self.to_text().encode("ascii")

    @classmethod
    def from_text(cls, text: str) -> "HeCiphertext":
        match = _CT_PATTERN.match(text)
        if match is None:
            raise HomomorphicError("malformed ciphertext text")
        backend, epoch, key_id, nonce, payload = match.groups()
        ct = cls(backend=backend, epoch=int(epoch), key_id=key_id, nonce=int(nonce, 16), payload=bytes.fromhex(payload))
        if ct.to_text() != text:
            raise HomomorphicError("ciphertext text is not canonical")
        return ct

    @classmethod
    def from_bytes(cls, data: bytes) -> "HeCiphertext":
        try:
            return cls.from_text(data.decode("ascii"))
        except UnicodeDecodeError as e:
            raise HomomorphicError("ciphertext bytes are not ascii") from e


class MacKey(BaseModel):
    model_config = ConfigDict(frozen=True)

    key: bytes = Field(min_length=16, max_length=16)


class SignedMessage(BaseModel):
    """(message, tag) bound to a label such as "keys" or "pad:0"."""

    model_config = ConfigDict(frozen=True)

    label: str = ""
    message: bytes
    tag: bytes

    def with_message(self, message: bytes) -> "SignedMessage":
        return SignedMessage(label=self.label, message=message, tag=self.tag)

    def with_tag(self, tag: bytes) -> "SignedMessage":
        return SignedMessage(label=self.label, message=self.message, tag=tag)


def join_ciphertexts(cts) -> bytes:
    """Newline-joined canonical texts; the message format of signed ciphertext records."""
    return "\n".join(ct.to_text() for ct in cts).encode("ascii")


def split_ciphertexts(data: bytes, expected: Optional[int] = None) -> list[HeCiphertext]:
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as e:
        raise HomomorphicError("signed record is not ascii") from e
    cts = [HeCiphertext.from_text(line) for line in text.split("\n")] if text else []
    if expected is not None and len(cts) != expected:
        raise HomomorphicError(f"expected {expected} ciphertexts, record holds {len(cts)}")
    return cts
