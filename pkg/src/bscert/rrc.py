"""SIB1 frame construction for both schemes, against the 372-byte budget.

Two wire layouts are modeled:

* ours:  {SIB1, n, t, S_k(SIB1, n, t)} - one signature, keys delivered
  offline via the ledger.
* sota:  the comparison scheme that ships key material in-band: two public
  keys (base station and intermediary) plus three chain signatures, with the
  same n, t fields retained so the comparison isolates signature-count cost
  rather than replay protection.

Sizes are exact integer formulas over the suite table, so budget checks are
deterministic. The file codec in this module adds a small envelope (length
prefix, suite code) for persistence; the modeled over-the-air size is
``wire_size`` / ``encoded_size``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .crypto import (
    KeyPair,
    PublicKey,
    Signature,
    SuiteId,
    SuiteMismatchError,
    get_suite,
    sign,
    suite_from_wire_code,
    verify,
)

SIB1_SIZE_LIMIT = 372  # transport block cap: 2976 bits
NONCE_BYTES = 4
TIMESTAMP_BYTES = 4
REPLAY_FIELDS_BYTES = NONCE_BYTES + TIMESTAMP_BYTES

# The unsigned SIB1 baseline (PLMN/TAC/frequency/scheduling stand-ins plus the
# embedded cell ID). Must keep every ours-scheme suite within the 372-byte cap
# while the in-band sota layout exceeds it for every suite beyond ECDSA-224.
DEFAULT_BASE_SIZE = 48

_CELL_ID_BYTES = 8
_U32_MAX = (1 << 32) - 1


class FrameError(Exception):
    """Malformed frame construction or decoding input."""


class Scheme(str, Enum):
    OURS = "ours"
    SOTA = "sota"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


@dataclass(frozen=True)
class Sib1Payload:
    """Unsigned SIB1 stand-in; the cell ID occupies the first eight bytes."""

    cell_id: int
    base_fields: bytes

    def __post_init__(self) -> None:
        if len(self.base_fields) < _CELL_ID_BYTES:
            raise FrameError("base_fields must hold at least the 8-byte cell id")
        if self.base_fields[:_CELL_ID_BYTES] != struct.pack(">Q", self.cell_id):
            raise FrameError("base_fields do not embed the declared cell id")

    @property
    def base_size(self) -> int:
        return len(self.base_fields)

    @classmethod
    def build(cls, cell_id: int, base_size: int = DEFAULT_BASE_SIZE,
              filler: Optional[bytes] = None) -> "Sib1Payload":
        """Assemble a payload of exactly base_size bytes with cell_id embedded."""
        if base_size < _CELL_ID_BYTES:
            raise FrameError(f"base_size must be >= {_CELL_ID_BYTES}, got {base_size}")
        if not 0 <= cell_id < (1 << 64):
            raise FrameError(f"cell id {cell_id} out of range")
        room = base_size - _CELL_ID_BYTES
        body = filler if filler is not None else bytes(room)
        if len(body) != room:
            raise FrameError(f"filler must be exactly {room} bytes, got {len(body)}")
        return cls(cell_id=cell_id, base_fields=struct.pack(">Q", cell_id) + body)


def _check_u32(name: str, value: int) -> None:
    if not 0 <= value <= _U32_MAX:
        raise FrameError(f"{name} must fit an unsigned 32-bit field, got {value}")


def signed_bytes(payload: Sib1Payload, nonce: int, timestamp: int) -> bytes:
    """Exact byte string covered by the broadcast signature."""
    return payload.base_fields + struct.pack(">II", nonce, timestamp)


@dataclass(frozen=True)
class SignedSib1:
    """Broadcast frame {SIB1, n, t, S_k(SIB1, n, t)}."""

    payload: Sib1Payload
    nonce: int
    timestamp: int
    signature: Signature

    @property
    def wire_size(self) -> int:
        return self.payload.base_size + REPLAY_FIELDS_BYTES + len(self.signature.data)


def sign_sib1(bs_keypair: KeyPair, payload: Sib1Payload, nonce: int, timestamp: int) -> SignedSib1:
    _check_u32("nonce", nonce)
    _check_u32("timestamp", timestamp)
    signature = sign(bs_keypair, signed_bytes(payload, nonce, timestamp))
    return SignedSib1(payload=payload, nonce=nonce, timestamp=timestamp, signature=signature)


def verify_sib1(bs_public_key: PublicKey, frame: SignedSib1) -> bool:
    """True iff the frame's signature covers its payload, nonce, and timestamp.

    A suite mismatch is attacker-controlled input here, so it reads as a
    failed verification rather than an error.
    """
    try:
        return verify(
            bs_public_key,
            signed_bytes(frame.payload, frame.nonce, frame.timestamp),
            frame.signature,
        )
    except SuiteMismatchError:
        return False


# -- sota comparison model ---------------------------------------------------

def credential_bytes(subject_key: PublicKey) -> bytes:
    """Byte string an issuer signs when vouching for a subject key."""
    return struct.pack(">B", get_suite(subject_key.suite_id).wire_code) + subject_key.data


@dataclass(frozen=True)
class SotaCredential:
    """In-band (public key, issuer signature) pair; not a full certificate."""

    subject_public_key: PublicKey
    issuer_signature: Signature


@dataclass(frozen=True)
class SotaSib1:
    """Comparison frame carrying the whole chain in-band.

    chain material: intermediary credential (signed by the core network),
    base-station credential (signed by the intermediary), and the SIB1
    signature itself - three verifications per frame.
    """

    payload: Sib1Payload
    nonce: int
    timestamp: int
    intermediary_credential: SotaCredential
    bs_credential: SotaCredential
    sib1_signature: Signature

    @property
    def bs_public_key(self) -> PublicKey:
        return self.bs_credential.subject_public_key

    @property
    def intermediary_public_key(self) -> PublicKey:
        return self.intermediary_credential.subject_public_key

    @property
    def chain_signatures(self) -> tuple[Signature, Signature, Signature]:
        return (
            self.intermediary_credential.issuer_signature,
            self.bs_credential.issuer_signature,
            self.sib1_signature,
        )

    @property
    def wire_size(self) -> int:
        return (
            self.payload.base_size
            + len(self.bs_public_key.data)
            + len(self.intermediary_public_key.data)
            + sum(len(sig.data) for sig in self.chain_signatures)
            + REPLAY_FIELDS_BYTES
        )


def build_sota_chain(
    core_keypair: KeyPair, intermediary_keypair: KeyPair, bs_keypair: KeyPair
) -> tuple[SotaCredential, SotaCredential]:
    """Chain credentials: core vouches for the intermediary, which vouches for the BS."""
    intermediary_cred = SotaCredential(
        subject_public_key=intermediary_keypair.public,
        issuer_signature=sign(core_keypair, credential_bytes(intermediary_keypair.public)),
    )
    bs_cred = SotaCredential(
        subject_public_key=bs_keypair.public,
        issuer_signature=sign(intermediary_keypair, credential_bytes(bs_keypair.public)),
    )
    return intermediary_cred, bs_cred


def sign_sota_sib1(
    bs_keypair: KeyPair,
    intermediary_credential: SotaCredential,
    bs_credential: SotaCredential,
    payload: Sib1Payload,
    nonce: int,
    timestamp: int,
) -> SotaSib1:
    _check_u32("nonce", nonce)
    _check_u32("timestamp", timestamp)
    return SotaSib1(
        payload=payload,
        nonce=nonce,
        timestamp=timestamp,
        intermediary_credential=intermediary_credential,
        bs_credential=bs_credential,
        sib1_signature=sign(bs_keypair, signed_bytes(payload, nonce, timestamp)),
    )


@dataclass(frozen=True)
class SotaVerification:
    ok: bool
    signature_checks: int  # verifications actually performed (3 when accepted)

    def __bool__(self) -> bool:
        return self.ok


def verify_sota_sib1(core_public_key: PublicKey, frame: SotaSib1) -> SotaVerification:
    """Walk the chain: core -> intermediary -> base station -> SIB1."""
    checks = 0

    def _try(key: PublicKey, message: bytes, sig: Signature) -> bool:
        nonlocal checks
        checks += 1
        try:
            return verify(key, message, sig)
        except SuiteMismatchError:
            return False

    inter = frame.intermediary_credential
    if not _try(core_public_key, credential_bytes(inter.subject_public_key),
                inter.issuer_signature):
        return SotaVerification(False, checks)
    bs = frame.bs_credential
    if not _try(inter.subject_public_key, credential_bytes(bs.subject_public_key),
                bs.issuer_signature):
        return SotaVerification(False, checks)
    if not _try(bs.subject_public_key,
                signed_bytes(frame.payload, frame.nonce, frame.timestamp),
                frame.sib1_signature):
        return SotaVerification(False, checks)
    return SotaVerification(True, checks)


# -- byte budgets ------------------------------------------------------------

def encoded_size(scheme: "Scheme | str", suite: "SuiteId | str", base_size: int) -> int:
    """Modeled over-the-air SIB1 size for one scheme, suite, and payload size."""
    if base_size < 0:
        raise FrameError(f"base_size must be >= 0, got {base_size}")
    table = get_suite(suite)
    if Scheme(scheme) is Scheme.OURS:
        return base_size + REPLAY_FIELDS_BYTES + table.signature_size
    return (
        base_size
        + 2 * table.public_key_size
        + 3 * table.signature_size
        + REPLAY_FIELDS_BYTES
    )


def check_budget(size: int) -> bool:
    """True iff a frame of this size fits the SIB1 transport block."""
    return size <= SIB1_SIZE_LIMIT


@dataclass(frozen=True)
class BudgetRow:
    scheme: Scheme
    suite_id: SuiteId
    size: int
    fits: bool


def budget_table(base_size: int = DEFAULT_BASE_SIZE) -> list[BudgetRow]:
    """One row per (scheme, suite): the content behind the packet-size figure."""
    from .crypto import ALL_SUITE_IDS

    rows = []
    for scheme in (Scheme.OURS, Scheme.SOTA):
        for suite_id in ALL_SUITE_IDS:
            size = encoded_size(scheme, suite_id, base_size)
            rows.append(BudgetRow(scheme, suite_id, size, check_budget(size)))
    return rows


# -- persistence codec -------------------------------------------------------

def encode_frame(frame: SignedSib1) -> bytes:
    """Length-prefixed payload, n, t, suite code, then the fixed-width signature."""
    return (
        struct.pack(">H", frame.payload.base_size)
        + frame.payload.base_fields
        + struct.pack(">II", frame.nonce, frame.timestamp)
        + struct.pack(">B", get_suite(frame.signature.suite_id).wire_code)
        + frame.signature.data
    )


def decode_frame(data: bytes) -> SignedSib1:
    if len(data) < 2:
        raise FrameError("frame too short")
    (base_size,) = struct.unpack_from(">H", data, 0)
    pos = 2
    if pos + base_size + REPLAY_FIELDS_BYTES + 1 > len(data):
        raise FrameError("frame payload truncated")
    base_fields = data[pos : pos + base_size]
    pos += base_size
    nonce, timestamp = struct.unpack_from(">II", data, pos)
    pos += REPLAY_FIELDS_BYTES
    suite = suite_from_wire_code(data[pos])
    pos += 1
    if len(data) - pos != suite.signature_size:
        raise FrameError("frame signature length mismatch")
    (cell_id,) = struct.unpack_from(">Q", base_fields, 0)
    return SignedSib1(
        payload=Sib1Payload(cell_id=cell_id, base_fields=base_fields),
        nonce=nonce,
        timestamp=timestamp,
        signature=Signature(suite.suite_id, data[pos:]),
    )
