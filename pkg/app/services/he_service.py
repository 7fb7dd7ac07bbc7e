"""
Classical homomorphic encryption with computation-log fragments.

``TransparentHE`` is the reference backend: a ciphertext carries its
plaintext in the clear next to the epoch, key id and a nonce. It honours
every interface contract (epochs, recryption, function evaluation, a
declared garden-hose protocol) and provides no secrecy at all.
"""

import hashlib
import logging
from abc import ABC, abstractmethod
from typing import Optional, Sequence

from app.exceptions import EpochError, GadgetError, HomomorphicError
from app.models.crypto import HeCiphertext, HeKeyPair, HeKeySet, HePublicKey
from app.models.gardenhose import GardenHoseSpec
from app.models.log import LogEntry, LogEntryKind
from app.services.he_functions import apply_function, lookup
from app.services.rng_service import RngStream

logger = logging.getLogger("app.clcrypto")


def key_id_for(secret: bytes) -> str:
    return hashlib.sha256(secret).hexdigest()[:16]


class HomomorphicBackend(ABC):
    """Capability interface of a classical homomorphic scheme."""

    tag: str = ""

    @abstractmethod
    def keygen(self, epoch: int, rng: RngStream) -> HeKeyPair:
        """Fresh key pair for one epoch."""

    @abstractmethod
    def enc(self, pk: HePublicKey, plaintext: bytes, nonce: int) -> HeCiphertext:
        """Encrypt with explicit randomness."""

    @abstractmethod
    def dec(self, key: HeKeyPair, ct: HeCiphertext) -> bytes:
        """Decrypt a ciphertext of the key's epoch."""

    @abstractmethod
    def eval(
        self, evk: HePublicKey, function_id: str, inputs: Sequence[HeCiphertext], nonces: Sequence[int]
    ) -> list[HeCiphertext]:
        """Evaluate a registered function; outputs are at the epoch of ``evk``."""

    @abstractmethod
    def recrypt(self, evk: HePublicKey, sk_material: HeCiphertext, ct: HeCiphertext, nonce: int) -> HeCiphertext:
        """Move ``ct`` one epoch forward using an encryption of the previous secret key."""

    def secret_material(self, key: HeKeyPair) -> bytes:
        """Plaintext form of a secret key, as encrypted for recryption."""
        return key.secret

    def garden_hose_protocol(self) -> Optional[GardenHoseSpec]:
        """Gadget layout evaluating this backend's decryption, if the backend declares one."""
        return None

    def route_choice(self, ct: HeCiphertext) -> int:
        """Route the evaluator takes through a gadget for an encrypted bit."""
        raise GadgetError(f"backend {self.tag} declares no garden-hose protocol")


class TransparentHE(HomomorphicBackend):
    """Correct and insecure reference backend: ciphertexts hold their plaintext."""

    tag = "transparent"

    def keygen(self, epoch: int, rng: RngStream) -> HeKeyPair:
        secret = rng.bytes(16)
        return HeKeyPair(backend=self.tag, epoch=epoch, key_id=key_id_for(secret), secret=secret)

    def enc(self, pk: HePublicKey, plaintext: bytes, nonce: int) -> HeCiphertext:
        self._check_backend(pk.backend)
        return HeCiphertext(backend=self.tag, epoch=pk.epoch, key_id=pk.key_id, nonce=nonce, payload=bytes(plaintext))

    def dec(self, key: HeKeyPair, ct: HeCiphertext) -> bytes:
        self._check_backend(ct.backend)
        if ct.epoch != key.epoch or ct.key_id != key.key_id:
            raise EpochError(f"ciphertext of epoch {ct.epoch} does not belong to the epoch-{key.epoch} key")
        return ct.payload

    def eval(
        self, evk: HePublicKey, function_id: str, inputs: Sequence[HeCiphertext], nonces: Sequence[int]
    ) -> list[HeCiphertext]:
        func, _ = lookup(function_id)
        for ct in inputs:
            self._check_backend(ct.backend)
        if func.arity is not None and len(inputs) != func.arity:
            raise HomomorphicError(f"{func.name} takes {func.arity} inputs, got {len(inputs)}")
        if func.cross_epoch:
            *earlier, last = inputs
            if any(ct.epoch != evk.epoch - 1 for ct in earlier) or not self._at(last, evk):
                raise EpochError(f"{func.name} takes inputs of epochs {evk.epoch - 1} and {evk.epoch}")
        elif any(not self._at(ct, evk) for ct in inputs):
            raise EpochError(f"{func.name} inputs must all be at epoch {evk.epoch}")
        outputs = apply_function(function_id, [ct.payload for ct in inputs])
        if len(nonces) != len(outputs):
            raise HomomorphicError(f"{func.name} needs {len(outputs)} nonces, got {len(nonces)}")
        return [self.enc(evk, out, n) for out, n in zip(outputs, nonces)]

    def recrypt(self, evk: HePublicKey, sk_material: HeCiphertext, ct: HeCiphertext, nonce: int) -> HeCiphertext:
        if not self._at(sk_material, evk):
            raise EpochError(f"key material must be encrypted under the epoch-{evk.epoch} key")
        if ct.epoch != evk.epoch - 1:
            raise EpochError(f"recrypt to epoch {evk.epoch} needs a ciphertext of epoch {evk.epoch - 1}, got {ct.epoch}")
        if key_id_for(sk_material.payload) != ct.key_id:
            raise EpochError("key material does not decrypt this ciphertext")
        return self.enc(evk, ct.payload, nonce)

    def garden_hose_protocol(self) -> Optional[GardenHoseSpec]:
        # three pairs: the input pair, the output pair and one P-twisted detour
        return GardenHoseSpec(
            pair_count=3,
            links=((0, 2), (1, 5), (3, 4)),
            p_link=2,
            routes={0: ((2, 1),), 1: ((2, 3), (4, 1))},
        )

    def route_choice(self, ct: HeCiphertext) -> int:
        if ct.payload not in (b"0", b"1"):
            raise GadgetError("routing ciphertext does not hold a bit")
        return int(ct.payload == b"1")

    def _check_backend(self, tag: str) -> None:
        if tag != self.tag:
            raise HomomorphicError(f"object of backend {tag!r} handed to backend {self.tag!r}")

    @staticmethod
    def _at(ct: HeCiphertext, key: HePublicKey) -> bool:
        return ct.epoch == key.epoch and ct.key_id == key.key_id


BACKENDS: dict[str, type[HomomorphicBackend]] = {TransparentHE.tag: TransparentHE}


def get_backend(tag: str = TransparentHE.tag) -> HomomorphicBackend:
    if tag not in BACKENDS:
        raise HomomorphicError(f"unknown backend {tag!r}")
    return BACKENDS[tag]()


class HomomorphicService:
    """HE.KeyGen / Enc / Eval / Dec / recrypt, each returning its log fragment."""

    def __init__(self, backend: Optional[HomomorphicBackend] = None):
        self.backend = backend or get_backend()
        self.logger = logger

    def keygen(self, t: int, rng: RngStream) -> HeKeySet:
        """
        Key pairs for epochs 0..t.

        Args:
            t: Last epoch (number of T gates supported)
            rng: Key randomness

        Returns:
            t + 1 independent key pairs
        """
        if t < 0:
            raise HomomorphicError("epoch count must be non-negative")
        return HeKeySet(pairs=tuple(self.backend.keygen(i, rng) for i in range(t + 1)))

    def enc(self, pk: HePublicKey, plaintext: bytes, rng: RngStream, label: str = "") -> tuple[HeCiphertext, LogEntry]:
        nonce = rng.uint64()
        ct = self.backend.enc(pk, plaintext, nonce)
        entry = LogEntry(
            kind=LogEntryKind.ENC,
            function_id=label or "enc",
            payload={"epoch": pk.epoch, "nonce": nonce, "plaintext": bytes(plaintext).hex()},
            outputs=(ct,),
        )
        return ct, entry

    def dec(self, key: HeKeyPair, ct: HeCiphertext) -> bytes:
        return self.backend.dec(key, ct)

    def eval(
        self, evk: HePublicKey, function_id: str, inputs: Sequence[HeCiphertext], rng: RngStream, refs: Sequence[str] = ()
    ) -> tuple[list[HeCiphertext], LogEntry]:
        """
        Homomorphic evaluation of a registered function.

        Args:
            evk: Evaluation key of the output epoch
            function_id: Registered function id
            inputs: Input ciphertexts
            rng: Source of the output nonces
            refs: Log references of the inputs

        Returns:
            Output ciphertexts and the eval log entry
        """
        func, _ = lookup(function_id)
        nonces = [rng.uint64() for _ in range(func.outputs)]
        outputs = self.backend.eval(evk, function_id, inputs, nonces)
        entry = LogEntry(
            kind=LogEntryKind.EVAL,
            function_id=function_id,
            inputs=tuple(refs),
            payload={"epoch": evk.epoch, "nonces": nonces},
            outputs=tuple(outputs),
        )
        return outputs, entry

    def recrypt(
        self, evk: HePublicKey, sk_material: HeCiphertext, ct: HeCiphertext, rng: RngStream, refs: Sequence[str] = ()
    ) -> tuple[HeCiphertext, LogEntry]:
        nonce = rng.uint64()
        out = self.backend.recrypt(evk, sk_material, ct, nonce)
        entry = LogEntry(
            kind=LogEntryKind.RECRYPT,
            function_id="recrypt",
            inputs=tuple(refs),
            payload={"epoch": evk.epoch, "nonce": nonce},
            outputs=(out,),
        )
        return out, entry


# Global instance
homomorphic_service = HomomorphicService()
