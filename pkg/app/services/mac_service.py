"""
Message authentication for the classical parts of evaluation keys and ciphertexts.

Tags are HMAC-SHA256 truncated to 128 bits over ``label || 0x00 || message``.
"""

import json
import logging
from pathlib import Path
from typing import Optional

from cryptography.hazmat.primitives import constant_time, hashes, hmac

from app.models.crypto import MacKey, SignedMessage
from app.services.rng_service import RngStream

logger = logging.getLogger("app.clcrypto")

TAG_BYTES = 16
VECTORS_PATH = Path(__file__).resolve().parent.parent / "data" / "mac_vectors.json"


def raw_tag(key: bytes, data: bytes) -> bytes:
    h = hmac.HMAC(key, hashes.SHA256())
    h.update(data)
    return h.finalize()[:TAG_BYTES]


class MacService:
    """MAC.KeyGen / Sign / Ver."""

    def __init__(self):
        self.logger = logger

    def keygen(self, rng: RngStream) -> MacKey:
        return MacKey(key=rng.bytes(TAG_BYTES))

    def tag(self, key: MacKey, message: bytes, label: str = "") -> bytes:
        return raw_tag(key.key, label.encode("utf-8") + b"\x00" + message)

    def sign(self, key: MacKey, message: bytes, label: str = "") -> SignedMessage:
        return SignedMessage(label=label, message=message, tag=self.tag(key, message, label))

    def verify(self, key: MacKey, signed: SignedMessage) -> bool:
        """Recompute the tag and compare in constant time."""
        expected = self.tag(key, signed.message, signed.label)
        ok = constant_time.bytes_eq(expected, signed.tag)
        if not ok:
            self.logger.info(f"MAC verification failed label={signed.label!r}")
        return ok

    def check_vectors(self, path: Optional[Path] = None) -> list[str]:
        """
        Check the shipped test vectors.

        Returns:
            Names of failing vectors; a missing or unreadable file counts as one failure
        """
        path = path or VECTORS_PATH
        try:
            vectors = json.loads(Path(path).read_text())["vectors"]
            failures = []
            for vector in vectors:
                tag = raw_tag(bytes.fromhex(vector["key"]), bytes.fromhex(vector["data"]))
                if not constant_time.bytes_eq(tag, bytes.fromhex(vector["tag"])):
                    failures.append(vector["name"])
        except (OSError, ValueError, KeyError, TypeError) as e:
            self.logger.error(f"Cannot read MAC vectors path={path} error={e}")
            return [f"unreadable:{path}"]
        if failures:
            self.logger.error(f"MAC vectors failed names={','.join(failures)}")
        return failures


# Global instance
mac_service = MacService()
