"""Permissioned, hash-chained certificate ledger.

Only the key published in the genesis block may append; everyone reads.
Consensus is the degenerate difficulty-0 case: every block hash is acceptable,
so there is no mining loop, just an integrity chain. Appends never mutate
existing blocks; each append returns a new ledger snapshot.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import BinaryIO, Optional

from .certificate import (
    BaseStationCertificate,
    CertificateError,
    DuplicateCellIdError,
    EncodingError,
    canonical_bytes,
    decode_certificate,
    encode_certificate,
    verify_certificate,
)
from .crypto import (
    KeyPair,
    PublicKey,
    Signature,
    SuiteMismatchError,
    get_suite,
    public_key_of_private,
    sign,
    suite_from_wire_code,
    verify,
)

GENESIS_PREV_HASH = bytes(32)
HASH_SIZE = 32
LEDGER_MAGIC = b"BSL1"

SECONDS_PER_YEAR = 3.1536e7
DEFAULT_BLOCK_SIZE = 1417  # metrics parity with the reference accounting
ETHEREUM_RECOMMENDED_TPS = 20.0


class LedgerError(Exception):
    """Base class for ledger errors."""


class UnauthorizedWriterError(LedgerError):
    """Append attempted with a key other than the genesis core-network key."""


class InvalidCertificateError(LedgerError):
    """Certificate offered for append does not verify under the core key."""


class LedgerFormatError(LedgerError):
    """Ledger file bytes cannot be parsed."""


class LedgerIntegrityError(LedgerError):
    """Parsed ledger fails chain verification (treated as hostile input)."""


@dataclass(frozen=True)
class Block:
    height: int  # 1-based; genesis is height 1
    prev_hash: bytes
    timestamp: int
    payload: BaseStationCertificate
    writer_signature: Signature
    block_hash: bytes


def _signing_bytes(height: int, prev_hash: bytes, timestamp: int, payload: bytes) -> bytes:
    return (
        struct.pack(">Q", height)
        + prev_hash
        + struct.pack(">Q", timestamp)
        + struct.pack(">I", len(payload))
        + payload
    )


def _hashable_bytes(block_body: bytes, signature: Signature) -> bytes:
    return (
        block_body
        + struct.pack(">B", get_suite(signature.suite_id).wire_code)
        + struct.pack(">H", len(signature.data))
        + signature.data
    )


def block_bytes(block: Block) -> bytes:
    """Serialized block: signed body, writer signature, then the stored hash."""
    body = _signing_bytes(
        block.height, block.prev_hash, block.timestamp, encode_certificate(block.payload)
    )
    return _hashable_bytes(body, block.writer_signature) + block.block_hash


def decode_block(data: bytes) -> Block:
    if len(data) < 8 + HASH_SIZE + 8 + 4:
        raise LedgerFormatError("block entry too short")
    height, = struct.unpack_from(">Q", data, 0)
    prev_hash = data[8 : 8 + HASH_SIZE]
    timestamp, = struct.unpack_from(">Q", data, 8 + HASH_SIZE)
    payload_len, = struct.unpack_from(">I", data, 16 + HASH_SIZE)
    pos = 20 + HASH_SIZE
    if pos + payload_len > len(data):
        raise LedgerFormatError("block payload truncated")
    try:
        payload = decode_certificate(data[pos : pos + payload_len])
    except (EncodingError, CertificateError) as exc:
        raise LedgerFormatError(f"bad block payload: {exc}") from exc
    pos += payload_len
    if pos + 3 > len(data):
        raise LedgerFormatError("block signature truncated")
    sig_code, sig_len = struct.unpack_from(">BH", data, pos)
    pos += 3
    if pos + sig_len + HASH_SIZE != len(data):
        raise LedgerFormatError("block entry length mismatch")
    suite = suite_from_wire_code(sig_code)
    if sig_len != suite.signature_size:
        raise LedgerFormatError("writer signature length does not match its suite")
    signature = Signature(suite.suite_id, data[pos : pos + sig_len])
    pos += sig_len
    return Block(
        height=height,
        prev_hash=prev_hash,
        timestamp=timestamp,
        payload=payload,
        writer_signature=signature,
        block_hash=data[pos:],
    )


def _make_block(
    height: int,
    prev_hash: bytes,
    timestamp: int,
    payload: BaseStationCertificate,
    writer: KeyPair,
) -> Block:
    body = _signing_bytes(height, prev_hash, timestamp, encode_certificate(payload))
    signature = sign(writer, body)
    block_hash = hashlib.sha256(_hashable_bytes(body, signature)).digest()
    return Block(height, prev_hash, timestamp, payload, signature, block_hash)


@dataclass(frozen=True)
class Ledger:
    """Immutable chain snapshot with a cell-ID index into the newest certificate."""

    blocks: tuple[Block, ...]
    index: dict  # cell_id -> position of the most recent certificate

    @property
    def height(self) -> int:
        return len(self.blocks)

    @property
    def core_public_key(self) -> PublicKey:
        return self.blocks[0].payload.body.subject_public_key


def _build_index(blocks: tuple[Block, ...]) -> dict:
    # Genesis publishes the writer key, not a base station; it stays out of
    # the lookup index.
    return {
        block.payload.body.subject_cell_id: pos
        for pos, block in enumerate(blocks)
        if pos > 0
    }


def create_genesis(
    core_keypair: KeyPair,
    core_self_certificate: BaseStationCertificate,
    timestamp: int = 0,
) -> Ledger:
    """Start a ledger whose genesis block publishes the core-network key."""
    body = core_self_certificate.body
    if body.subject_public_key != core_keypair.public:
        raise LedgerError("genesis certificate does not carry the core keypair's key")
    check = verify_certificate(body.subject_public_key, core_self_certificate, timestamp)
    if not check:
        raise LedgerError(f"malformed genesis self-certificate: {check.reason.value}")
    block = _make_block(1, GENESIS_PREV_HASH, timestamp, core_self_certificate, core_keypair)
    return Ledger(blocks=(block,), index={})


def append_certificate(
    ledger: Ledger,
    cert: BaseStationCertificate,
    writer_key: KeyPair,
    timestamp: Optional[int] = None,
    allow_reissue: bool = False,
) -> Ledger:
    """Append one certificate; only the genesis key is authorized to write.

    Authorization recomputes the writer's public key from its private half, so
    a mismatched pair cannot impersonate the core network.
    """
    core_key = ledger.core_public_key
    try:
        derived = public_key_of_private(writer_key.suite_id, writer_key.private_key)
    except Exception as exc:
        raise UnauthorizedWriterError(f"writer key unusable: {exc}") from exc
    if derived != core_key:
        raise UnauthorizedWriterError(
            "append rejected: writer key is not the genesis core-network key"
        )
    if timestamp is None:
        timestamp = ledger.blocks[-1].timestamp
    check = verify_certificate(core_key, cert, timestamp)
    if not check:
        raise InvalidCertificateError(
            f"certificate rejected at append: {check.reason.value}"
        )
    cell_id = cert.body.subject_cell_id
    if cell_id in ledger.index and not allow_reissue:
        raise DuplicateCellIdError(
            f"ledger already holds a certificate for cell {cell_id:#x}"
        )
    prev = ledger.blocks[-1]
    block = _make_block(prev.height + 1, prev.block_hash, timestamp, cert, writer_key)
    blocks = ledger.blocks + (block,)
    index = dict(ledger.index)
    index[cell_id] = len(blocks) - 1
    return Ledger(blocks=blocks, index=index)


@dataclass(frozen=True)
class ChainCheck:
    ok: bool
    first_bad_height: Optional[int] = None
    reason: Optional[str] = None

    def __bool__(self) -> bool:
        return self.ok


def verify_chain(ledger: Ledger, core_public_key: PublicKey) -> ChainCheck:
    """Verify hash links and writer signatures end to end.

    The difficulty-0 consensus makes every hash value acceptable, so the only
    hash requirement is consistency. The genesis block must publish exactly
    the caller's trust-anchor key and must be validly self-signed.
    """
    if not ledger.blocks:
        return ChainCheck(False, None, "empty ledger")
    prev_hash = GENESIS_PREV_HASH
    for pos, block in enumerate(ledger.blocks):
        height = pos + 1
        if block.height != height:
            return ChainCheck(False, height, "height out of sequence")
        body = _signing_bytes(
            block.height, block.prev_hash, block.timestamp,
            encode_certificate(block.payload),
        )
        if hashlib.sha256(_hashable_bytes(body, block.writer_signature)).digest() != block.block_hash:
            return ChainCheck(False, height, "block hash mismatch")
        if block.prev_hash != prev_hash:
            return ChainCheck(False, height, "broken hash link")
        try:
            if not verify(core_public_key, body, block.writer_signature):
                return ChainCheck(False, height, "writer signature invalid")
        except SuiteMismatchError:
            return ChainCheck(False, height, "writer signature suite mismatch")
        if pos == 0:
            genesis_key = block.payload.body.subject_public_key
            if genesis_key != core_public_key:
                return ChainCheck(False, 1, "genesis key is not the trust anchor")
            try:
                self_ok = verify(
                    genesis_key,
                    canonical_bytes(block.payload.body),
                    block.payload.issuer_signature,
                )
            except SuiteMismatchError:
                self_ok = False
            if not self_ok:
                return ChainCheck(False, 1, "genesis self-signature invalid")
        prev_hash = block.block_hash
    return ChainCheck(True)


def lookup(ledger: Ledger, cell_id: int) -> Optional[BaseStationCertificate]:
    """Most recent certificate for a cell ID, or None if unregistered."""
    pos = ledger.index.get(cell_id)
    if pos is None:
        return None
    return ledger.blocks[pos].payload


@dataclass(frozen=True)
class ScalabilityReport:
    """Certificate-rate and ledger-growth requirement for a deployment size."""

    x: float  # base-station count
    y: float  # average lifespan, years
    block_size: int
    cert_rate: float  # certificates per second
    ledger_growth: float  # bytes per second


def scalability(x: float, y: float, block_size: int = DEFAULT_BLOCK_SIZE) -> ScalabilityReport:
    """Required certificates/second and bytes/second for x stations living y years."""
    if x < 0:
        raise ValueError(f"base-station count must be >= 0, got {x}")
    if y <= 0:
        raise ValueError(f"average lifespan must be positive, got {y}")
    if block_size <= 0:
        raise ValueError(f"block size must be positive, got {block_size}")
    cert_rate = x / (SECONDS_PER_YEAR * y)
    return ScalabilityReport(
        x=x, y=y, block_size=block_size,
        cert_rate=cert_rate, ledger_growth=block_size * cert_rate,
    )


def measured_block_sizes(ledger: Ledger) -> list[int]:
    """Actual serialized block sizes, as opposed to the block_size parameter."""
    return [len(block_bytes(block)) for block in ledger.blocks]


def export_ledger(ledger: Ledger, target: "str | BinaryIO") -> None:
    """Write magic bytes then length-prefixed blocks in height order."""
    if isinstance(target, str):
        with open(target, "wb") as handle:
            export_ledger(ledger, handle)
        return
    target.write(LEDGER_MAGIC)
    for block in ledger.blocks:
        data = block_bytes(block)
        target.write(struct.pack(">I", len(data)))
        target.write(data)


def import_ledger(source: "str | BinaryIO") -> Ledger:
    """Parse a ledger file and re-verify the chain before returning it."""
    if isinstance(source, str):
        with open(source, "rb") as handle:
            return import_ledger(handle)
    data = source.read()
    if data[:4] != LEDGER_MAGIC:
        raise LedgerFormatError("missing BSL1 magic bytes")
    pos = 4
    blocks: list[Block] = []
    while pos < len(data):
        if pos + 4 > len(data):
            raise LedgerFormatError("truncated block length prefix")
        (length,) = struct.unpack_from(">I", data, pos)
        pos += 4
        if pos + length > len(data):
            raise LedgerFormatError("truncated block entry")
        blocks.append(decode_block(data[pos : pos + length]))
        pos += length
    if not blocks:
        raise LedgerFormatError("ledger file holds no blocks")
    ledger = Ledger(blocks=tuple(blocks), index=_build_index(tuple(blocks)))
    check = verify_chain(ledger, ledger.core_public_key)
    if not check:
        raise LedgerIntegrityError(
            f"imported ledger failed verification at height {check.first_bad_height}: "
            f"{check.reason}"
        )
    return ledger
