"""
Tests for the classical primitives: MAC, homomorphic backend and the
function registry it evaluates.
"""

import json

import numpy as np
import pytest

from app.exceptions import EpochError, HomomorphicError
from app.models.crypto import HeCiphertext
from app.services.he_functions import apply_function, decode_bits, encode_bits, encode_perm, registered_functions
from app.services.he_service import homomorphic_service
from app.services.mac_service import VECTORS_PATH, mac_service


@pytest.mark.unit
class TestMacService:
    """Test MAC signing and verification."""

    def test_sign_and_verify(self, rng):
        """Test a fresh signature verifies."""
        key = mac_service.keygen(rng)
        signed = mac_service.sign(key, b"payload", "pad:0")
        assert len(signed.tag) == 16
        assert mac_service.verify(key, signed)

    def test_modified_message_fails(self, rng):
        """Test a changed message or label breaks the tag."""
        key = mac_service.keygen(rng)
        signed = mac_service.sign(key, b"payload", "pad:0")
        assert not mac_service.verify(key, signed.with_message(b"paylaod"))
        assert not mac_service.verify(key, signed.model_copy(update={"label": "pad:1"}))

    def test_wrong_key_fails(self, rng):
        """Test verification under another key."""
        signed = mac_service.sign(mac_service.keygen(rng), b"payload", "keys")
        assert not mac_service.verify(mac_service.keygen(rng), signed)

    def test_shipped_vectors(self):
        """Test the HMAC-SHA256-128 vectors pass."""
        assert mac_service.check_vectors() == []

    def test_corrupted_vector_file(self, tmp_path):
        """Test a flipped tag in the vector file is reported."""
        data = json.loads(VECTORS_PATH.read_text())
        first = data["vectors"][0]
        first["tag"] = ("0" if first["tag"][0] != "0" else "1") + first["tag"][1:]
        path = tmp_path / "vectors.json"
        path.write_text(json.dumps(data))
        assert mac_service.check_vectors(path) == [first["name"]]

    def test_missing_vector_file(self, tmp_path):
        """Test a missing file counts as a failure."""
        failures = mac_service.check_vectors(tmp_path / "absent.json")
        assert len(failures) == 1
        assert failures[0].startswith("unreadable:")


@pytest.mark.unit
class TestHomomorphicService:
    """Test the transparent backend through the service."""

    def test_enc_dec(self, rng):
        """Test decryption returns the plaintext."""
        keys = homomorphic_service.keygen(1, rng)
        ct, entry = homomorphic_service.enc(keys.pk(0), b"0110", rng, "pad:0")
        assert homomorphic_service.dec(keys.pair(0), ct) == b"0110"
        assert entry.function_id == "pad:0"

    def test_eval_xor(self, rng):
        """Test homomorphic xor."""
        pair = homomorphic_service.keygen(0, rng).pair(0)
        a, _ = homomorphic_service.enc(pair.pk, b"0101", rng)
        b, _ = homomorphic_service.enc(pair.pk, b"0011", rng)
        (out,), entry = homomorphic_service.eval(pair.evk, "xor", [a, b], rng, ["0.0", "1.0"])
        assert homomorphic_service.dec(pair, out) == b"0110"
        assert entry.inputs == ("0.0", "1.0")

    def test_dec_with_wrong_epoch(self, rng):
        """Test a ciphertext only decrypts under its own epoch."""
        keys = homomorphic_service.keygen(1, rng)
        ct, _ = homomorphic_service.enc(keys.pk(0), b"1", rng)
        with pytest.raises(EpochError):
            homomorphic_service.dec(keys.pair(1), ct)

    def test_eval_mixed_epochs(self, rng):
        """Test eval refuses inputs from another epoch."""
        keys = homomorphic_service.keygen(1, rng)
        a, _ = homomorphic_service.enc(keys.pk(0), b"01", rng)
        b, _ = homomorphic_service.enc(keys.pk(1), b"01", rng)
        with pytest.raises(EpochError):
            homomorphic_service.eval(keys.pair(1).evk, "xor", [a, b], rng)

    def test_recrypt_moves_one_epoch(self, rng):
        """Test recryption with the encrypted previous secret."""
        keys = homomorphic_service.keygen(1, rng)
        backend = homomorphic_service.backend
        ct, _ = homomorphic_service.enc(keys.pk(0), b"101", rng)
        material, _ = homomorphic_service.enc(keys.pk(1), backend.secret_material(keys.pair(0)), rng)
        moved, entry = homomorphic_service.recrypt(keys.pair(1).evk, material, ct, rng, ["0.0"])
        assert moved.epoch == 1
        assert homomorphic_service.dec(keys.pair(1), moved) == b"101"
        assert entry.payload["epoch"] == 1

    def test_recrypt_skipping_epochs(self, rng):
        """Test recryption from epoch 0 straight to epoch 2."""
        keys = homomorphic_service.keygen(2, rng)
        backend = homomorphic_service.backend
        ct, _ = homomorphic_service.enc(keys.pk(0), b"1", rng)
        material, _ = homomorphic_service.enc(keys.pk(2), backend.secret_material(keys.pair(0)), rng)
        with pytest.raises(EpochError):
            homomorphic_service.recrypt(keys.pair(2).evk, material, ct, rng)

    def test_unknown_function(self, rng):
        """Test unregistered function ids."""
        pair = homomorphic_service.keygen(0, rng).pair(0)
        with pytest.raises(HomomorphicError):
            homomorphic_service.eval(pair.evk, "sha1", [], rng)

    def test_ciphertext_text_roundtrip(self, rng):
        """Test the canonical text form parses back."""
        pair = homomorphic_service.keygen(0, rng).pair(0)
        ct, _ = homomorphic_service.enc(pair.pk, b"\x00\xff", rng)
        assert HeCiphertext.from_text(ct.to_text()) == ct
        with pytest.raises(HomomorphicError):
            HeCiphertext.from_text(ct.to_text().upper())


@pytest.mark.unit
class TestHeFunctions:
    """Test the registered plaintext functions."""

    def test_registry(self):
        """Test the functions the scheme needs are registered."""
        names = registered_functions()
        for name in ("xor", "cnot-key-update", "tc-verdec-measurement", "t-key-update", "gh-route"):
            assert name in names

    def test_cnot_key_update(self):
        """Test (xi, zi, xj, zj) -> (xi, zi^zj, xi^xj, zj)."""
        out = apply_function("cnot-key-update", [b"10", b"01", b"11", b"11"])
        assert out == [b"10", b"10", b"01", b"11"]

    def test_permute_unpermute(self):
        """Test unpermute inverts permute."""
        pi = encode_perm([2, 0, 1])
        (moved,) = apply_function("permute", [b"100", pi])
        (back,) = apply_function("unpermute", [moved, pi])
        assert back == b"100"

    def test_bit_codec(self):
        """Test bit strings encode as ASCII digits."""
        bits = np.array([1, 0, 1], dtype=np.uint8)
        assert encode_bits(bits) == b"101"
        assert np.array_equal(decode_bits(b"101"), bits)
        with pytest.raises(HomomorphicError):
            decode_bits(b"102")

    def test_arity_checked(self):
        """Test a wrong input count."""
        with pytest.raises(HomomorphicError):
            apply_function("xor", [b"1"])
