"""ECDSA signature suites with fixed-width encodings for deterministic byte budgets.

Curve arithmetic is delegated to the pyca/cryptography backend; this module
owns the suite registry (key/signature/public-key sizes) and the wire
encodings. Signatures are fixed-width (r, s) pairs, each component zero-padded
to the suite's component size, so frame and block sizes never depend on the
message being signed.

Signing is nonce-deterministic (RFC 6979), so the same key and message always
produce the same signature bytes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.asymmetric.utils import (
    decode_dss_signature,
    encode_dss_signature,
)


class CryptoError(Exception):
    """Base class for signature-suite errors."""


class UnsupportedSuiteError(CryptoError):
    """Suite id is not in the registry."""


class SuiteUnavailableError(CryptoError):
    """Suite is registered for size accounting but has no runtime backend."""


class SuiteMismatchError(CryptoError):
    """Key and signature (or two keys) carry different suite ids."""


class MalformedKeyError(CryptoError):
    """Key bytes cannot be loaded for the claimed suite."""


class SuiteId(str, Enum):
    ECDSA_224 = "ecdsa-224"
    ECDSA_256 = "ecdsa-256"
    ECDSA_384 = "ecdsa-384"
    ECDSA_521 = "ecdsa-521"
    ECDSA_571 = "ecdsa-571"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


@dataclass(frozen=True)
class SignatureSuite:
    """One row of the suite table.

    ``component_size`` is the zero-padded width of each of r and s;
    ``signature_size`` is always ``2 * component_size`` and
    ``public_key_size`` is the X9.62 uncompressed-point width
    ``2 * ceil(key_bits / 8) + 1``.
    """

    suite_id: SuiteId
    key_bits: int
    component_size: int
    signature_size: int
    public_key_size: int
    wire_code: int
    curve_factory: Optional[Callable[[], ec.EllipticCurve]]
    hash_factory: Optional[Callable[[], hashes.HashAlgorithm]]

    @property
    def available(self) -> bool:
        return self.curve_factory is not None


def _suite(
    suite_id: SuiteId,
    key_bits: int,
    component_size: int,
    wire_code: int,
    curve_factory: Optional[Callable[[], ec.EllipticCurve]],
    hash_factory: Optional[Callable[[], hashes.HashAlgorithm]],
) -> SignatureSuite:
    coord = (key_bits + 7) // 8
    return SignatureSuite(
        suite_id=suite_id,
        key_bits=key_bits,
        component_size=component_size,
        signature_size=2 * component_size,
        public_key_size=2 * coord + 1,
        wire_code=wire_code,
        curve_factory=curve_factory,
        hash_factory=hash_factory,
    )


# ECDSA-224 components are padded to 32 bytes (not the raw 28) to pin its
# signature at 64 bytes, matching the 72-byte frame overhead the rest of the
# size accounting is built on. All other suites pad to ceil(key_bits / 8).
#
# ECDSA-571 (sect571r1) has no backend in modern pyca/cryptography builds; it
# stays in the table so byte-budget analyses cover it, and sign/verify raise
# SuiteUnavailableError.
SUITES: dict[SuiteId, SignatureSuite] = {
    SuiteId.ECDSA_224: _suite(SuiteId.ECDSA_224, 224, 32, 1, ec.SECP224R1, hashes.SHA224),
    SuiteId.ECDSA_256: _suite(SuiteId.ECDSA_256, 256, 32, 2, ec.SECP256R1, hashes.SHA256),
    SuiteId.ECDSA_384: _suite(SuiteId.ECDSA_384, 384, 48, 3, ec.SECP384R1, hashes.SHA384),
    SuiteId.ECDSA_521: _suite(SuiteId.ECDSA_521, 521, 66, 4, ec.SECP521R1, hashes.SHA512),
    SuiteId.ECDSA_571: _suite(SuiteId.ECDSA_571, 571, 72, 5, None, None),
}

_WIRE_CODE_TO_SUITE = {s.wire_code: s.suite_id for s in SUITES.values()}

ALL_SUITE_IDS: tuple[SuiteId, ...] = tuple(SUITES)


def get_suite(ref: "SuiteId | str | SignatureSuite") -> SignatureSuite:
    """Resolve a suite id, name, or suite object to the registry entry."""
    if isinstance(ref, SignatureSuite):
        return ref
    try:
        suite_id = SuiteId(ref)
    except ValueError:
        raise UnsupportedSuiteError(f"unsupported signature suite: {ref!r}") from None
    return SUITES[suite_id]


def suite_from_wire_code(code: int) -> SignatureSuite:
    try:
        return SUITES[_WIRE_CODE_TO_SUITE[code]]
    except KeyError:
        raise UnsupportedSuiteError(f"unknown suite wire code: {code}") from None


def suite_sizes(ref: "SuiteId | str | SignatureSuite") -> tuple[int, int]:
    """Return the frozen (signature_size, public_key_size) for a suite."""
    suite = get_suite(ref)
    return suite.signature_size, suite.public_key_size


def size_table_rows() -> list[tuple[str, int, int, int]]:
    """Size table as (suite_id, key_bits, signature_size, public_key_size) rows."""
    return [
        (s.suite_id.value, s.key_bits, s.signature_size, s.public_key_size)
        for s in SUITES.values()
    ]


@dataclass(frozen=True)
class Signature:
    """Fixed-width ECDSA signature: r and s zero-padded to the suite width."""

    suite_id: SuiteId
    data: bytes

    def __post_init__(self) -> None:
        expected = get_suite(self.suite_id).signature_size
        if len(self.data) != expected:
            raise ValueError(
                f"{self.suite_id.value} signature must be {expected} bytes, "
                f"got {len(self.data)}"
            )


@dataclass(frozen=True)
class PublicKey:
    """Suite-tagged X9.62 uncompressed-point public key."""

    suite_id: SuiteId
    data: bytes

    def __post_init__(self) -> None:
        expected = get_suite(self.suite_id).public_key_size
        if len(self.data) != expected:
            raise ValueError(
                f"{self.suite_id.value} public key must be {expected} bytes, "
                f"got {len(self.data)}"
            )


@dataclass(frozen=True)
class KeyPair:
    """Public/private pair for one suite; both halves are opaque bytes."""

    suite_id: SuiteId
    public_key: bytes
    private_key: bytes

    @property
    def public(self) -> PublicKey:
        return PublicKey(self.suite_id, self.public_key)


def _require_available(suite: SignatureSuite) -> None:
    if not suite.available:
        raise SuiteUnavailableError(
            f"suite {suite.suite_id.value} is size-registered only; "
            "no cryptographic backend is available at runtime"
        )


def _coord_size(suite: SignatureSuite) -> int:
    return (suite.key_bits + 7) // 8


@lru_cache(maxsize=4096)
def _load_private(suite_id: SuiteId, private_key: bytes) -> ec.EllipticCurvePrivateKey:
    suite = SUITES[suite_id]
    _require_available(suite)
    if len(private_key) != _coord_size(suite):
        raise MalformedKeyError(
            f"{suite_id.value} private key must be {_coord_size(suite)} bytes"
        )
    value = int.from_bytes(private_key, "big")
    try:
        return ec.derive_private_key(value, suite.curve_factory())
    except ValueError as exc:
        raise MalformedKeyError(f"invalid {suite_id.value} private key: {exc}") from exc


@lru_cache(maxsize=4096)
def _load_public(suite_id: SuiteId, public_key: bytes) -> ec.EllipticCurvePublicKey:
    suite = SUITES[suite_id]
    _require_available(suite)
    try:
        return ec.EllipticCurvePublicKey.from_encoded_point(
            suite.curve_factory(), public_key
        )
    except ValueError as exc:
        raise MalformedKeyError(f"invalid {suite_id.value} public key: {exc}") from exc


def _public_point_bytes(key: ec.EllipticCurvePublicKey) -> bytes:
    return key.public_bytes(
        serialization.Encoding.X962, serialization.PublicFormat.UncompressedPoint
    )


def _seeded_scalar(suite: SignatureSuite, seed: int) -> int:
    # Derived scalars are kept below 2**(key_bits - 1), which is always less
    # than the group order for these curves, so rejection sampling (and a
    # hard-coded order table) is unnecessary.
    material = f"bscert.keygen:{suite.suite_id.value}:{seed}".encode()
    width = _coord_size(suite) + 16
    digest = hashlib.shake_256(material).digest(width)
    bound = (1 << (suite.key_bits - 1)) - 1
    return int.from_bytes(digest, "big") % bound + 1


def generate_keypair(ref: "SuiteId | str | SignatureSuite", seed: Optional[int] = None) -> KeyPair:
    """Generate a key pair; a given seed always yields the same pair."""
    suite = get_suite(ref)
    _require_available(suite)
    if seed is None:
        private = ec.generate_private_key(suite.curve_factory())
    else:
        private = ec.derive_private_key(_seeded_scalar(suite, seed), suite.curve_factory())
    private_bytes = private.private_numbers().private_value.to_bytes(
        _coord_size(suite), "big"
    )
    return KeyPair(
        suite_id=suite.suite_id,
        public_key=_public_point_bytes(private.public_key()),
        private_key=private_bytes,
    )


def public_key_of_private(suite_ref: "SuiteId | str | SignatureSuite", private_key: bytes) -> PublicKey:
    """Recompute the public key that pairs with raw private-key bytes."""
    suite = get_suite(suite_ref)
    loaded = _load_private(suite.suite_id, private_key)
    return PublicKey(suite.suite_id, _public_point_bytes(loaded.public_key()))


def _fixed_width(suite: SignatureSuite, der_signature: bytes) -> bytes:
    r, s = decode_dss_signature(der_signature)
    width = suite.component_size
    return r.to_bytes(width, "big") + s.to_bytes(width, "big")


def sign(keypair: KeyPair, message: bytes) -> Signature:
    """Sign a message with the pair's private key (deterministic nonce)."""
    suite = get_suite(keypair.suite_id)
    _require_available(suite)
    if not message:
        raise ValueError("message must be non-empty")
    private = _load_private(suite.suite_id, keypair.private_key)
    der = private.sign(
        message, ec.ECDSA(suite.hash_factory(), deterministic_signing=True)
    )
    return Signature(suite.suite_id, _fixed_width(suite, der))


def verify(public_key: PublicKey, message: bytes, signature: Signature) -> bool:
    """True iff the signature was made by the paired private key over message.

    A suite mismatch between key and signature raises SuiteMismatchError;
    plain verification failure returns False.
    """
    if public_key.suite_id != signature.suite_id:
        raise SuiteMismatchError(
            f"public key is {public_key.suite_id.value}, "
            f"signature is {signature.suite_id.value}"
        )
    suite = get_suite(public_key.suite_id)
    _require_available(suite)
    width = suite.component_size
    r = int.from_bytes(signature.data[:width], "big")
    s = int.from_bytes(signature.data[width:], "big")
    try:
        der = encode_dss_signature(r, s)
    except ValueError:
        return False
    loaded = _load_public(suite.suite_id, public_key.data)
    try:
        loaded.verify(der, message, ec.ECDSA(suite.hash_factory()))
    except InvalidSignature:
        return False
    return True
