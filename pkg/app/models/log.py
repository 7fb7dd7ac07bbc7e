"""
Computation log: an append-only transcript of every classical step of an
evaluation, written one entry per line under a versioned header.

Line format: ``seq|kind|function-id|input-refs|digest|payload-hex``. Input
refs name outputs of earlier entries as ``seq.k``; the payload is canonical
JSON (sorted keys, no whitespace) in lowercase hex; the digest is the first
8 bytes of MD5 over the other fields and the entry's output ciphertexts.
"""

import hashlib
import json
import re
from enum import Enum
from typing import Any, Iterator, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.exceptions import LogFormatError
from app.models.crypto import HeCiphertext

LOG_HEADER = "TRAPTP-LOG v1"

_LINE = re.compile(r"^(\d+)\|([a-z-]+)\|([^|]*)\|((?:\d+\.\d+(?:,\d+\.\d+)*)?)\|([0-9a-f]{16})\|((?:[0-9a-f]{2})*)$")
_REF = re.compile(r"^(\d+)\.(\d+)$")


class LogEntryKind(str, Enum):
    ENC = "enc"
    EVAL = "eval"
    RECRYPT = "recrypt"
    MEASUREMENT = "measurement"
    GATE_CLAIM = "gate-claim"
    FINAL_KEYS = "final-keys"


def ref_of(seq: int, k: int = 0) -> str:
    return f"{seq}.{k}"


def parse_ref(ref: str) -> tuple[int, int]:
    match = _REF.match(ref)
    if match is None:
        raise LogFormatError(f"bad output reference {ref!r}")
    return int(match.group(1)), int(match.group(2))


def canonical_json(payload: dict[str, Any]) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


class LogEntry(BaseModel):
    """One log entry; ``outputs`` are kept in memory by the writer and never serialized."""

    model_config = ConfigDict(frozen=True)

    seq: int = -1
    kind: LogEntryKind
    function_id: str
    inputs: tuple[str, ...] = ()
    payload: dict[str, Any] = Field(default_factory=dict)
    digest: str = ""
    outputs: tuple[HeCiphertext, ...] = Field(default=(), exclude=True)

    @field_validator("function_id")
    @classmethod
    def _plain_id(cls, value: str) -> str:
        if "|" in value or "\n" in value or not value.isascii():
            raise ValueError("function id may not contain '|', newlines or non-ascii text")
        return value

    def payload_hex(self) -> str:
        return canonical_json(self.payload).encode("ascii").hex()

    def body(self) -> str:
        return f"{self.seq}|{self.kind.value}|{self.function_id}|{','.join(self.inputs)}|{self.payload_hex()}"

    def compute_digest(self, outputs: Optional[Sequence[HeCiphertext]] = None) -> str:
        outputs = self.outputs if outputs is None else outputs
        h = hashlib.md5(self.body().encode("ascii"), usedforsecurity=False)
        for ct in outputs:
            h.update(ct.to_bytes() + b"\n")
        return h.hexdigest()[:16]

    def ref(self, k: int = 0) -> str:
        return ref_of(self.seq, k)

    def to_line(self) -> str:
        return f"{self.seq}|{self.kind.value}|{self.function_id}|{','.join(self.inputs)}|{self.digest}|{self.payload_hex()}"

    @classmethod
    def from_line(cls, line: str, index: int) -> "LogEntry":
        match = _LINE.match(line)
        if match is None:
            raise LogFormatError(f"entry {index} is malformed")
        seq, kind, function_id, refs, digest, payload_hex = match.groups()
        if int(seq) != index:
            raise LogFormatError(f"entry {index} carries sequence number {seq}")
        try:
            payload = json.loads(bytes.fromhex(payload_hex).decode("ascii"))
            entry = cls(
                seq=index,
                kind=LogEntryKind(kind),
                function_id=function_id,
                inputs=tuple(refs.split(",")) if refs else (),
                payload=payload,
                digest=digest,
            )
        except (ValueError, UnicodeDecodeError, TypeError) as e:
            raise LogFormatError(f"entry {index} does not decode: {e}") from e
        for ref in entry.inputs:
            if parse_ref(ref)[0] >= index:
                raise LogFormatError(f"entry {index} references a later entry {ref}")
        if entry.to_line() != line:
            raise LogFormatError(f"entry {index} is not in canonical form")
        return entry


class ComputationLog:
    """Append-only list of entries with monotone sequence numbers."""

    def __init__(self, entries: Sequence[LogEntry] = ()):
        self._entries: list[LogEntry] = list(entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[LogEntry]:
        return iter(self._entries)

    def __getitem__(self, index: int) -> LogEntry:
        return self._entries[index]

    @property
    def entries(self) -> list[LogEntry]:
        return list(self._entries)

    def append(self, entry: LogEntry) -> LogEntry:
        """Assign the next sequence number and the digest; returns the stored entry."""
        stored = entry.model_copy(update={"seq": len(self._entries)})
        stored = stored.model_copy(update={"digest": stored.compute_digest()})
        self._entries.append(stored)
        return stored

    def output(self, ref: str) -> HeCiphertext:
        seq, k = parse_ref(ref)
        if seq >= len(self._entries) or k >= len(self._entries[seq].outputs):
            raise LogFormatError(f"reference {ref} has no recorded output")
        return self._entries[seq].outputs[k]

    def of_kind(self, kind: LogEntryKind) -> list[LogEntry]:
        return [e for e in self._entries if e.kind is kind]

    def claims(self) -> list[str]:
        return [e.function_id for e in self._entries if e.kind is LogEntryKind.GATE_CLAIM]

    def to_text(self) -> str:
        return LOG_HEADER + "\n" + "".join(e.to_line() + "\n" for e in self._entries)

    @classmethod
    def from_text(cls, text: str) -> "ComputationLog":
        """Strict parse; anything that is not exactly what ``to_text`` writes is rejected."""
        if not text.isascii():
            raise LogFormatError("log contains non-ascii characters")
        if not text.startswith(LOG_HEADER + "\n"):
            raise LogFormatError("missing or unknown log header")
        body = text[len(LOG_HEADER) + 1 :]
        if body and not body.endswith("\n"):
            raise LogFormatError("log does not end with a newline")
        lines = body.split("\n")[:-1] if body else []
        log = cls([LogEntry.from_line(line, i) for i, line in enumerate(lines)])
        if log.to_text() != text:
            raise LogFormatError("log is not in canonical form")
        return log
