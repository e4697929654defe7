"""Base-station certificates binding a cell ID, a public key, and a location.

The certificate body is an X.509-shaped record with the web-PKI subject
replaced by the cell ID and a geographic location added. Bodies have a
canonical binary encoding (length-prefixed fields in declaration order,
big-endian integers, coordinates quantized to signed 32-bit micro-degrees)
that is what gets hashed and signed; a JSON export exists for inspection but
is never signed.
"""

from __future__ import annotations

import csv
import logging
import struct
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from threading import Lock
from typing import Iterable, TextIO

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

logger = logging.getLogger(__name__)

MAX_CELL_ID = (1 << 36) - 1  # 36-bit NR cell identity, carried in a u64 field
MICRO_DEG = 1_000_000


class CertificateError(Exception):
    """Base class for certificate construction and issuance errors."""


class CoordinateError(CertificateError):
    """Latitude or longitude outside WGS84 bounds."""


class ValidityError(CertificateError):
    """not_before/not_after interval is empty or inverted."""


class ProofError(CertificateError):
    """CSR proof-of-possession did not verify (possible forged CSR)."""


class DuplicateCellIdError(CertificateError):
    """Cell ID already has an issued certificate."""


class PolicyError(CertificateError):
    """CSR violates the issuance policy."""


class FleetError(CertificateError):
    """Fleet CSV is malformed."""


class EncodingError(CertificateError):
    """Canonical bytes cannot be decoded."""


Location = tuple[float, float]  # (latitude, longitude), degrees WGS84


def validate_location(location: Location) -> None:
    lat, lon = location
    if not -90.0 <= lat <= 90.0:
        raise CoordinateError(f"latitude {lat} outside [-90, 90]")
    if not -180.0 <= lon <= 180.0:
        raise CoordinateError(f"longitude {lon} outside [-180, 180]")


@dataclass(frozen=True)
class Validity:
    """Inclusive validity window [not_before, not_after], unix seconds."""

    not_before: int
    not_after: int

    def __post_init__(self) -> None:
        if self.not_before >= self.not_after:
            raise ValidityError(
                f"not_before ({self.not_before}) must precede not_after ({self.not_after})"
            )

    @property
    def duration(self) -> int:
        return self.not_after - self.not_before

    def contains(self, now: float) -> bool:
        return self.not_before <= now <= self.not_after


@dataclass(frozen=True)
class CertificateBody:
    """Signed portion of a base-station certificate."""

    version: int
    serial: int
    signature_algorithm: SuiteId  # suite of the issuer signature over this body
    issuer_id: str
    validity: Validity
    subject_cell_id: int
    subject_public_key: PublicKey
    location: Location

    def validate(self) -> None:
        if not 0 <= self.version < 256:
            raise CertificateError(f"version {self.version} out of range")
        if not 0 <= self.serial < (1 << 64):
            raise CertificateError(f"serial {self.serial} out of range")
        if not 0 <= self.subject_cell_id <= MAX_CELL_ID:
            raise CertificateError(
                f"cell id {self.subject_cell_id:#x} exceeds 36 bits"
            )
        validate_location(self.location)


@dataclass(frozen=True)
class CertificateSigningRequest:
    body: CertificateBody
    proof_of_possession: Signature  # subject's signature over canonical body bytes


@dataclass(frozen=True)
class BaseStationCertificate:
    body: CertificateBody
    issuer_signature: Signature


def _quantize(degrees: float) -> int:
    return round(degrees * MICRO_DEG)


def canonical_bytes(body: CertificateBody) -> bytes:
    """Deterministic, injective encoding of a body; this is what gets signed.

    Coordinates are quantized to micro-degrees (~0.11 m), far below any
    sensible distance threshold.
    """
    issuer = body.issuer_id.encode("utf-8")
    key = body.subject_public_key
    parts = [
        struct.pack(">B", body.version),
        struct.pack(">Q", body.serial),
        struct.pack(">B", get_suite(body.signature_algorithm).wire_code),
        struct.pack(">H", len(issuer)),
        issuer,
        struct.pack(">QQ", body.validity.not_before, body.validity.not_after),
        struct.pack(">Q", body.subject_cell_id),
        struct.pack(">B", get_suite(key.suite_id).wire_code),
        struct.pack(">H", len(key.data)),
        key.data,
        struct.pack(">ii", _quantize(body.location[0]), _quantize(body.location[1])),
    ]
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise EncodingError("truncated certificate bytes")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def done(self) -> bool:
        return self.pos == len(self.data)


def _decode_body_from(reader: _Reader) -> CertificateBody:
    (version,) = reader.unpack(">B")
    (serial,) = reader.unpack(">Q")
    (alg_code,) = reader.unpack(">B")
    (issuer_len,) = reader.unpack(">H")
    issuer_id = reader.take(issuer_len).decode("utf-8")
    not_before, not_after = reader.unpack(">QQ")
    (cell_id,) = reader.unpack(">Q")
    (key_code,) = reader.unpack(">B")
    (key_len,) = reader.unpack(">H")
    key_suite = suite_from_wire_code(key_code)
    if key_len != key_suite.public_key_size:
        raise EncodingError("subject key length does not match its suite")
    key = PublicKey(key_suite.suite_id, reader.take(key_len))
    lat_u, lon_u = reader.unpack(">ii")
    return CertificateBody(
        version=version,
        serial=serial,
        signature_algorithm=suite_from_wire_code(alg_code).suite_id,
        issuer_id=issuer_id,
        validity=Validity(not_before, not_after),
        subject_cell_id=cell_id,
        subject_public_key=key,
        location=(lat_u / MICRO_DEG, lon_u / MICRO_DEG),
    )


def decode_body(data: bytes) -> CertificateBody:
    reader = _Reader(data)
    body = _decode_body_from(reader)
    if not reader.done():
        raise EncodingError("trailing bytes after certificate body")
    return body


def encode_certificate(cert: BaseStationCertificate) -> bytes:
    """Canonical body followed by the issuer signature (suite code + bytes)."""
    sig = cert.issuer_signature
    return b"".join(
        [
            canonical_bytes(cert.body),
            struct.pack(">B", get_suite(sig.suite_id).wire_code),
            struct.pack(">H", len(sig.data)),
            sig.data,
        ]
    )


def decode_certificate(data: bytes) -> BaseStationCertificate:
    reader = _Reader(data)
    body = _decode_body_from(reader)
    (sig_code,) = reader.unpack(">B")
    (sig_len,) = reader.unpack(">H")
    sig_suite = suite_from_wire_code(sig_code)
    if sig_len != sig_suite.signature_size:
        raise EncodingError("issuer signature length does not match its suite")
    signature = Signature(sig_suite.suite_id, reader.take(sig_len))
    if not reader.done():
        raise EncodingError("trailing bytes after certificate")
    return BaseStationCertificate(body=body, issuer_signature=signature)


def build_csr(
    cell_id: int,
    keypair: KeyPair,
    location: Location,
    validity: Validity,
    suite: "SuiteId | str | None" = None,
) -> CertificateSigningRequest:
    """Build a signing request whose proof-of-possession covers the body.

    The serial and issuer_id are placeholders until issuance; the issuer
    rewrites them (and the signature algorithm) before signing.
    """
    suite_id = keypair.suite_id if suite is None else get_suite(suite).suite_id
    if suite_id != keypair.suite_id:
        raise SuiteMismatchError(
            f"requested suite {suite_id.value} but keypair is {keypair.suite_id.value}"
        )
    body = CertificateBody(
        version=1,
        serial=0,
        signature_algorithm=suite_id,
        issuer_id="",
        validity=validity,
        subject_cell_id=cell_id,
        subject_public_key=keypair.public,
        location=location,
    )
    body.validate()
    proof = sign(keypair, canonical_bytes(body))
    return CertificateSigningRequest(body=body, proof_of_possession=proof)


def verify_proof_of_possession(csr: CertificateSigningRequest) -> bool:
    try:
        return verify(
            csr.body.subject_public_key,
            canonical_bytes(csr.body),
            csr.proof_of_possession,
        )
    except SuiteMismatchError:
        return False


@dataclass(frozen=True)
class IssuancePolicy:
    issuer_id: str = "core-network"
    max_validity_seconds: int = 10 * 365 * 24 * 3600
    allow_reissue: bool = False


class Issuer:
    """Core-network certificate issuer.

    Serials increase strictly per issuer; the serial counter and issued-ID set
    are the only mutable state and are guarded for the single-writer contract.
    """

    def __init__(self, keypair: KeyPair, policy: IssuancePolicy | None = None) -> None:
        self.keypair = keypair
        self.policy = policy or IssuancePolicy()
        self._next_serial = 1
        self._issued_ids: set[int] = set()
        self._lock = Lock()

    def sign_csr(self, csr: CertificateSigningRequest) -> BaseStationCertificate:
        csr.body.validate()
        if not verify_proof_of_possession(csr):
            raise ProofError(
                f"proof of possession failed for cell {csr.body.subject_cell_id:#x}"
            )
        if csr.body.validity.duration > self.policy.max_validity_seconds:
            raise PolicyError(
                f"requested validity {csr.body.validity.duration}s exceeds policy "
                f"maximum {self.policy.max_validity_seconds}s"
            )
        with self._lock:
            cell_id = csr.body.subject_cell_id
            if cell_id in self._issued_ids and not self.policy.allow_reissue:
                raise DuplicateCellIdError(
                    f"certificate already issued for cell {cell_id:#x}"
                )
            body = replace(
                csr.body,
                serial=self._next_serial,
                issuer_id=self.policy.issuer_id,
                signature_algorithm=self.keypair.suite_id,
            )
            signature = sign(self.keypair, canonical_bytes(body))
            self._next_serial += 1
            self._issued_ids.add(cell_id)
        return BaseStationCertificate(body=body, issuer_signature=signature)


def make_self_certificate(
    keypair: KeyPair,
    issuer_id: str,
    validity: Validity,
    cell_id: int = 0,
    location: Location = (0.0, 0.0),
) -> BaseStationCertificate:
    """Self-signed record publishing a key; used by the core network in genesis."""
    body = CertificateBody(
        version=1,
        serial=0,
        signature_algorithm=keypair.suite_id,
        issuer_id=issuer_id,
        validity=validity,
        subject_cell_id=cell_id,
        subject_public_key=keypair.public,
        location=location,
    )
    body.validate()
    return BaseStationCertificate(
        body=body, issuer_signature=sign(keypair, canonical_bytes(body))
    )


class CertFailure(str, Enum):
    OK = "ok"
    BAD_SIGNATURE = "bad_signature"
    EXPIRED = "expired"
    NOT_YET_VALID = "not_yet_valid"


@dataclass(frozen=True)
class CertificateCheck:
    ok: bool
    reason: CertFailure

    def __bool__(self) -> bool:
        return self.ok


def verify_certificate(
    issuer_public_key: PublicKey, cert: BaseStationCertificate, now: float
) -> CertificateCheck:
    """Check the issuer signature and that now falls inside the validity window."""
    try:
        good = verify(
            issuer_public_key, canonical_bytes(cert.body), cert.issuer_signature
        )
    except SuiteMismatchError:
        good = False
    if not good:
        return CertificateCheck(False, CertFailure.BAD_SIGNATURE)
    if now < cert.body.validity.not_before:
        return CertificateCheck(False, CertFailure.NOT_YET_VALID)
    if now > cert.body.validity.not_after:
        return CertificateCheck(False, CertFailure.EXPIRED)
    return CertificateCheck(True, CertFailure.OK)


def _iso(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat()


def certificate_to_json(cert: BaseStationCertificate) -> dict:
    """Human-readable export; never signed and never fed back into verification."""
    body = cert.body
    return {
        "version": body.version,
        "serial": body.serial,
        "signature_algorithm": body.signature_algorithm.value,
        "issuer_id": body.issuer_id,
        "not_before": _iso(body.validity.not_before),
        "not_after": _iso(body.validity.not_after),
        "subject_cell_id": body.subject_cell_id,
        "subject_public_key": body.subject_public_key.data.hex(),
        "subject_key_suite": body.subject_public_key.suite_id.value,
        "latitude": body.location[0],
        "longitude": body.location[1],
        "issuer_signature": cert.issuer_signature.data.hex(),
    }


@dataclass(frozen=True)
class FleetRecord:
    """One registered cell from an FCC-shaped fleet file."""

    cell_id: int
    latitude: float
    longitude: float


_FLEET_COLUMNS = ("cell_id", "latitude", "longitude")


def _parse_cell_id(raw: "str | None", row: int) -> int:
    try:
        value = int((raw or "").strip(), 0)
    except ValueError:
        raise FleetError(f"row {row}: cell_id {raw!r} is not an integer") from None
    if not 0 <= value <= MAX_CELL_ID:
        raise FleetError(f"row {row}: cell_id {raw!r} exceeds 36 bits")
    return value


def read_fleet_csv(source: "str | TextIO") -> list[FleetRecord]:
    """Read a fleet CSV with a mandatory cell_id,latitude,longitude header.

    Extra columns (as in real FCC exports) are ignored with a warning;
    duplicate cell IDs are an error naming the offending row.
    """
    if isinstance(source, str):
        with open(source, newline="") as handle:
            return read_fleet_csv(handle)
    reader = csv.DictReader(source)
    if reader.fieldnames is None:
        raise FleetError("fleet CSV is empty (header row required)")
    missing = [c for c in _FLEET_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise FleetError(f"fleet CSV header is missing columns: {', '.join(missing)}")
    extra = [c for c in reader.fieldnames if c not in _FLEET_COLUMNS]
    if extra:
        logger.warning("ignoring extra fleet CSV columns: %s", ", ".join(extra))
    records: list[FleetRecord] = []
    seen: dict[int, int] = {}
    for row_no, row in enumerate(reader, start=2):  # header is line 1
        cell_id = _parse_cell_id(row["cell_id"], row_no)
        try:
            lat = float(row["latitude"])
            lon = float(row["longitude"])
        except (TypeError, ValueError):
            raise FleetError(f"row {row_no}: latitude/longitude not numeric") from None
        try:
            validate_location((lat, lon))
        except CoordinateError as exc:
            raise FleetError(f"row {row_no}: {exc}") from None
        if cell_id in seen:
            raise FleetError(
                f"row {row_no}: duplicate cell_id {cell_id:#x} "
                f"(first seen at row {seen[cell_id]})"
            )
        seen[cell_id] = row_no
        records.append(FleetRecord(cell_id, lat, lon))
    return records


def write_fleet_csv(records: Iterable[FleetRecord], target: TextIO) -> None:
    writer = csv.writer(target)
    writer.writerow(_FLEET_COLUMNS)
    for rec in records:
        writer.writerow([rec.cell_id, rec.latitude, rec.longitude])
