"""
Sealing of classical key material: encrypt under an epoch key, then MAC-sign.
"""

import logging
from typing import Optional, Sequence

from app.models.crypto import HePublicKey, MacKey, SignedMessage, join_ciphertexts
from app.models.traptp import SideChannel, keys_message
from app.services.he_service import HomomorphicService, homomorphic_service
from app.services.mac_service import mac_service
from app.services.rng_service import RngStream

logger = logging.getLogger("app.traptp")


class RecordService:
    """Builds the signed records that accompany keys, resources and ciphertexts."""

    def __init__(self, he: Optional[HomomorphicService] = None):
        self.he = he or homomorphic_service
        self.logger = logger

    def seal(
        self,
        label: str,
        plaintexts: Sequence[bytes],
        pk: HePublicKey,
        mac_key: MacKey,
        rng: RngStream,
        side: Optional[SideChannel] = None,
    ) -> SignedMessage:
        """
        Encrypt each plaintext under ``pk`` and sign the joined ciphertexts.

        Args:
            label: Record label bound into the tag
            plaintexts: Values to encrypt, in record order
            pk: Epoch key to encrypt under
            mac_key: Signing key
            rng: Nonce source
            side: Hybrid side channel receiving a plaintext copy

        Returns:
            The signed record
        """
        cts = [self.he.backend.enc(pk, pt, rng.uint64()) for pt in plaintexts]
        record = mac_service.sign(mac_key, join_ciphertexts(cts), label)
        if side is not None:
            side.add(record, tuple(plaintexts))
        return record

    def seal_keys(
        self,
        pi_plain: bytes,
        pks: tuple[HePublicKey, ...],
        mac_key: MacKey,
        rng: RngStream,
        side: Optional[SideChannel] = None,
    ) -> SignedMessage:
        pi_ct = self.he.backend.enc(pks[0], pi_plain, rng.uint64())
        record = mac_service.sign(mac_key, keys_message(pi_ct, pks), "keys")
        if side is not None:
            side.add(record, (pi_plain,))
        return record


# Global instance
record_service = RecordService()
