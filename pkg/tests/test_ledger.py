import dataclasses
import io
import random

import pytest
from hypothesis import given, strategies as st

from bscert import certificate, crypto, ledger
from bscert.ledger import (
    GENESIS_PREV_HASH,
    InvalidCertificateError,
    LedgerFormatError,
    LedgerIntegrityError,
    UnauthorizedWriterError,
)

from conftest import NOW, build_ledger


def make_cert(issuer_obj, validity, cell_id, seed):
    kp = crypto.generate_keypair("ecdsa-224", seed=seed)
    csr = certificate.build_csr(cell_id, kp, (38.0, -104.0), validity)
    return issuer_obj.sign_csr(csr)


def test_genesis_shape(core_keypair, validity):
    self_cert = certificate.make_self_certificate(core_keypair, "core", validity)
    chain = ledger.create_genesis(core_keypair, self_cert, timestamp=NOW)
    assert chain.height == 1
    assert chain.blocks[0].prev_hash == GENESIS_PREV_HASH
    assert ledger.verify_chain(chain, core_keypair.public)


def test_genesis_requires_matching_key(core_keypair, validity):
    other = crypto.generate_keypair("ecdsa-224", seed=55)
    self_cert = certificate.make_self_certificate(other, "core", validity)
    with pytest.raises(ledger.LedgerError):
        ledger.create_genesis(core_keypair, self_cert, timestamp=NOW)


def test_append_and_lookup(core_keypair, issuer, validity):
    self_cert = certificate.make_self_certificate(core_keypair, "core", validity)
    chain = ledger.create_genesis(core_keypair, self_cert, timestamp=NOW)
    cert = make_cert(issuer, validity, 0xAB, seed=7)
    chain = ledger.append_certificate(chain, cert, core_keypair, timestamp=NOW)
    assert chain.height == 2
    assert ledger.lookup(chain, 0xAB) == cert
    assert ledger.lookup(chain, 0xAC) is None
    assert ledger.verify_chain(chain, core_keypair.public)


def test_append_is_persistent_snapshot(core_keypair, issuer, validity):
    self_cert = certificate.make_self_certificate(core_keypair, "core", validity)
    base = ledger.create_genesis(core_keypair, self_cert, timestamp=NOW)
    cert = make_cert(issuer, validity, 0xAB, seed=7)
    extended = ledger.append_certificate(base, cert, core_keypair, timestamp=NOW)
    assert base.height == 1 and extended.height == 2
    assert ledger.lookup(base, 0xAB) is None


def test_non_core_writers_rejected(small_ledger, issuer, validity, core_keypair):
    chain, _ = small_ledger
    cert = make_cert(issuer, validity, 0xFF, seed=321)
    rng = random.Random(5)
    for _ in range(100):
        attacker = crypto.generate_keypair("ecdsa-224", seed=rng.randrange(1 << 30))
        with pytest.raises(UnauthorizedWriterError):
            ledger.append_certificate(chain, cert, attacker, timestamp=NOW)
    # a frankenstein pair (attacker private, core public) must not pass either
    attacker = crypto.generate_keypair("ecdsa-224", seed=4242)
    forged = crypto.KeyPair(
        crypto.SuiteId.ECDSA_224, core_keypair.public_key, attacker.private_key
    )
    with pytest.raises(UnauthorizedWriterError):
        ledger.append_certificate(chain, cert, forged, timestamp=NOW)


def test_append_rejects_expired_certificate(core_keypair, issuer, validity):
    self_cert = certificate.make_self_certificate(core_keypair, "core", validity)
    chain = ledger.create_genesis(core_keypair, self_cert, timestamp=NOW)
    cert = make_cert(issuer, validity, 0xAB, seed=7)
    with pytest.raises(InvalidCertificateError):
        ledger.append_certificate(
            chain, cert, core_keypair, timestamp=validity.not_after + 10
        )


def test_bulk_append_100_and_exhaustive_lookup(core_keypair, validity):
    cells = [(0x1000 + n, (38.0 + n * 1e-4, -104.0)) for n in range(100)]
    chain, _ = build_ledger(core_keypair, validity, cells)
    assert chain.height == 101
    for cell_id, _loc in cells:
        found = ledger.lookup(chain, cell_id)
        assert found is not None and found.body.subject_cell_id == cell_id


def test_duplicate_id_needs_reissue_flag(core_keypair, validity):
    chain, _ = build_ledger(core_keypair, validity, [(0xAA, (38.0, -104.0))])
    reissuer = certificate.Issuer(
        core_keypair, certificate.IssuancePolicy(allow_reissue=True)
    )
    newer = make_cert(reissuer, validity, 0xAA, seed=777)
    with pytest.raises(certificate.DuplicateCellIdError):
        ledger.append_certificate(chain, newer, core_keypair, timestamp=NOW)
    chain = ledger.append_certificate(
        chain, newer, core_keypair, timestamp=NOW, allow_reissue=True
    )
    assert ledger.lookup(chain, 0xAA) == newer  # latest certificate wins


def test_verify_chain_localizes_tampered_payload(core_keypair, validity):
    cells = [(0x2000 + n, (38.0, -104.0)) for n in range(49)]
    chain, _ = build_ledger(core_keypair, validity, cells)  # height 50
    target = chain.blocks[9]
    moved = dataclasses.replace(target.payload.body, serial=target.payload.body.serial + 1)
    tampered_payload = certificate.BaseStationCertificate(
        moved, target.payload.issuer_signature
    )
    tampered = dataclasses.replace(target, payload=tampered_payload)
    blocks = chain.blocks[:9] + (tampered,) + chain.blocks[10:]
    bad = ledger.Ledger(blocks=blocks, index=chain.index)
    check = ledger.verify_chain(bad, core_keypair.public)
    assert not check
    assert check.first_bad_height == 10


def test_verify_chain_detects_reordering(core_keypair, validity):
    cells = [(0x3000 + n, (38.0, -104.0)) for n in range(5)]
    chain, _ = build_ledger(core_keypair, validity, cells)
    blocks = list(chain.blocks)
    blocks[2], blocks[3] = blocks[3], blocks[2]
    bad = ledger.Ledger(blocks=tuple(blocks), index=chain.index)
    check = ledger.verify_chain(bad, core_keypair.public)
    assert not check
    assert check.first_bad_height == 3


def test_verify_chain_rejects_wrong_anchor(small_ledger):
    chain, _ = small_ledger
    other = crypto.generate_keypair("ecdsa-224", seed=9999)
    check = ledger.verify_chain(chain, other.public)
    assert not check and check.first_bad_height == 1


def test_scalability_reference_values():
    report = ledger.scalability(418900, 0.5, 1417)
    assert report.cert_rate == pytest.approx(0.0266, abs=5e-5)
    assert report.ledger_growth == pytest.approx(1417 * report.cert_rate)
    assert report.ledger_growth == pytest.approx(37.6, abs=0.1)


def test_scalability_formula_identity():
    report = ledger.scalability(3.1536e7, 1.0, 1417)
    assert report.cert_rate == pytest.approx(1.0)


def test_scalability_validation():
    with pytest.raises(ValueError):
        ledger.scalability(100, 0.0)
    with pytest.raises(ValueError):
        ledger.scalability(-1, 1.0)
    with pytest.raises(ValueError):
        ledger.scalability(100, 1.0, 0)


@given(
    x=st.floats(min_value=0, max_value=1e12, allow_nan=False),
    y=st.floats(min_value=1e-6, max_value=1e6, allow_nan=False),
)
def test_scalability_rate_inverts_exactly(x, y):
    report = ledger.scalability(x, y)
    assert report.cert_rate * (3.1536e7 * y) == pytest.approx(x, rel=1e-12)


def test_export_import_roundtrip(core_keypair, validity):
    cells = [(0x4000 + n, (38.0, -104.0)) for n in range(99)]
    chain, _ = build_ledger(core_keypair, validity, cells)
    buf = io.BytesIO()
    ledger.export_ledger(chain, buf)
    restored = ledger.import_ledger(io.BytesIO(buf.getvalue()))
    assert restored.blocks == chain.blocks
    assert restored.index == chain.index


def test_import_rejects_truncation(core_keypair, validity):
    chain, _ = build_ledger(core_keypair, validity, [(0xAA, (38.0, -104.0))])
    buf = io.BytesIO()
    ledger.export_ledger(chain, buf)
    data = buf.getvalue()
    with pytest.raises(LedgerFormatError):
        ledger.import_ledger(io.BytesIO(data[:-10]))
    with pytest.raises(LedgerFormatError):
        ledger.import_ledger(io.BytesIO(b"NOPE" + data[4:]))


def test_import_rejects_interior_corruption(core_keypair, validity):
    cells = [(0x5000 + n, (38.0, -104.0)) for n in range(5)]
    chain, _ = build_ledger(core_keypair, validity, cells)
    buf = io.BytesIO()
    ledger.export_ledger(chain, buf)
    data = bytearray(buf.getvalue())
    data[len(data) // 2] ^= 0x01
    with pytest.raises((LedgerIntegrityError, LedgerFormatError)):
        ledger.import_ledger(io.BytesIO(bytes(data)))


def test_measured_block_sizes(small_ledger):
    chain, _ = small_ledger
    sizes = ledger.measured_block_sizes(chain)
    assert len(sizes) == chain.height
    assert all(size > 100 for size in sizes)
