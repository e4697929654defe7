import random

import pytest

from bscert import crypto
from bscert.crypto import SuiteId

AVAILABLE = [s for s in SuiteId if crypto.get_suite(s).available]

# Frozen size table: signature is 2 * ceil(key_bits / 8) except ECDSA-224,
# which is pinned to 64 bytes; public key is the uncompressed point,
# 2 * ceil(key_bits / 8) + 1.
EXPECTED_SIZES = {
    SuiteId.ECDSA_224: (64, 57),
    SuiteId.ECDSA_256: (64, 65),
    SuiteId.ECDSA_384: (96, 97),
    SuiteId.ECDSA_521: (132, 133),
    SuiteId.ECDSA_571: (144, 145),
}


@pytest.mark.parametrize("suite_id", list(SuiteId))
def test_suite_sizes_frozen(suite_id):
    assert crypto.suite_sizes(suite_id) == EXPECTED_SIZES[suite_id]


def test_seeded_keygen_is_deterministic():
    a = crypto.generate_keypair(SuiteId.ECDSA_224, seed=7)
    b = crypto.generate_keypair(SuiteId.ECDSA_224, seed=7)
    assert a == b
    assert a != crypto.generate_keypair(SuiteId.ECDSA_224, seed=8)


def test_unseeded_keygen_roundtrip():
    kp = crypto.generate_keypair(SuiteId.ECDSA_256)
    sig = crypto.sign(kp, b"x")
    assert crypto.verify(kp.public, b"x", sig)


@pytest.mark.parametrize("suite_id", AVAILABLE)
def test_key_and_signature_lengths(suite_id):
    kp = crypto.generate_keypair(suite_id, seed=1)
    sig_size, pk_size = EXPECTED_SIZES[suite_id]
    assert len(kp.public_key) == pk_size
    assert len(crypto.sign(kp, b"message").data) == sig_size


def test_public_key_size_matches_uncompressed_point_math():
    # 2 * ceil(key_bits / 8) + 1 for every suite, including the 571 entry
    # that has no runtime backend.
    for suite_id in SuiteId:
        suite = crypto.get_suite(suite_id)
        assert suite.public_key_size == 2 * ((suite.key_bits + 7) // 8) + 1


def test_pinned_224_signature_is_64_bytes():
    kp = crypto.generate_keypair(SuiteId.ECDSA_224, seed=3)
    sig = crypto.sign(kp, b"sib1 bytes")
    assert len(sig.data) == 64
    # raw (r, s) would be 56; the pin pads each component to 32
    assert sig.data[:4] == b"\x00\x00\x00\x00"


def test_verify_rejects_flipped_message_and_signature():
    kp = crypto.generate_keypair(SuiteId.ECDSA_256, seed=4)
    message = b"broadcast payload"
    sig = crypto.sign(kp, message)
    assert crypto.verify(kp.public, message, sig)
    assert not crypto.verify(kp.public, b"broadcast payloaD", sig)
    flipped = bytearray(sig.data)
    flipped[10] ^= 0x01
    bad = crypto.Signature(sig.suite_id, bytes(flipped))
    assert not crypto.verify(kp.public, message, bad)


def test_signatures_bind_to_their_key():
    kp1 = crypto.generate_keypair(SuiteId.ECDSA_224, seed=10)
    kp2 = crypto.generate_keypair(SuiteId.ECDSA_224, seed=11)
    sig1 = crypto.sign(kp1, b"same message")
    sig2 = crypto.sign(kp2, b"same message")
    assert crypto.verify(kp1.public, b"same message", sig1)
    assert crypto.verify(kp2.public, b"same message", sig2)
    assert not crypto.verify(kp2.public, b"same message", sig1)
    assert not crypto.verify(kp1.public, b"same message", sig2)


def test_suite_mismatch_is_an_error_not_a_false():
    kp224 = crypto.generate_keypair(SuiteId.ECDSA_224, seed=1)
    kp256 = crypto.generate_keypair(SuiteId.ECDSA_256, seed=1)
    sig = crypto.sign(kp256, b"m")
    with pytest.raises(crypto.SuiteMismatchError):
        crypto.verify(kp224.public, b"m", sig)


def test_unsupported_suite_rejected():
    with pytest.raises(crypto.UnsupportedSuiteError):
        crypto.generate_keypair("ecdsa-999")
    with pytest.raises(crypto.UnsupportedSuiteError):
        crypto.suite_sizes("rsa-2048")


def test_571_registered_for_sizes_but_unavailable_at_runtime():
    assert crypto.suite_sizes(SuiteId.ECDSA_571) == (144, 145)
    with pytest.raises(crypto.SuiteUnavailableError):
        crypto.generate_keypair(SuiteId.ECDSA_571)
    fake = crypto.KeyPair(SuiteId.ECDSA_571, bytes(145), bytes(72))
    with pytest.raises(crypto.SuiteUnavailableError):
        crypto.sign(fake, b"m")


def test_empty_message_rejected():
    kp = crypto.generate_keypair(SuiteId.ECDSA_224, seed=2)
    with pytest.raises(ValueError):
        crypto.sign(kp, b"")


def test_malformed_private_key():
    kp = crypto.generate_keypair(SuiteId.ECDSA_224, seed=2)
    broken = crypto.KeyPair(kp.suite_id, kp.public_key, bytes(len(kp.private_key)))
    with pytest.raises(crypto.MalformedKeyError):
        crypto.sign(broken, b"m")


def test_unforgeability_proxy_against_100_other_keys():
    signer = crypto.generate_keypair(SuiteId.ECDSA_224, seed=500)
    sig = crypto.sign(signer, b"target message")
    for seed in range(100):
        other = crypto.generate_keypair(SuiteId.ECDSA_224, seed=600 + seed)
        assert not crypto.verify(other.public, b"target message", sig)


@pytest.mark.parametrize("suite_id", AVAILABLE)
def test_size_determinism_1000_random_messages(suite_id):
    rng = random.Random(42)
    kp = crypto.generate_keypair(suite_id, seed=9)
    expected = crypto.get_suite(suite_id).signature_size
    for _ in range(1000):
        message = rng.randbytes(rng.randint(1, 300))
        assert len(crypto.sign(kp, message).data) == expected


def test_deterministic_signing_is_stable():
    kp = crypto.generate_keypair(SuiteId.ECDSA_256, seed=77)
    assert crypto.sign(kp, b"golden") == crypto.sign(kp, b"golden")


def test_size_table_rows_export_shape():
    rows = crypto.size_table_rows()
    assert len(rows) == 5
    assert rows[0] == ("ecdsa-224", 224, 64, 57)
    assert rows[-1] == ("ecdsa-571", 571, 144, 145)
