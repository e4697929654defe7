import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for the oracles module

from bscert import certificate, crypto, ledger

NOW = 1_700_000_000
BS_LOCATION = (38.8339, -104.8214)


@pytest.fixture(scope="session")
def validity():
    return certificate.Validity(NOW - 3600, NOW + 31_536_000)


@pytest.fixture(scope="session")
def core_keypair():
    return crypto.generate_keypair("ecdsa-224", seed=1)


@pytest.fixture()
def issuer(core_keypair):
    return certificate.Issuer(core_keypair)


def build_ledger(core_keypair, validity, cells):
    """Genesis plus one certificate per (cell_id, location) entry."""
    self_cert = certificate.make_self_certificate(core_keypair, "core-network", validity)
    chain = ledger.create_genesis(core_keypair, self_cert, timestamp=NOW - 3600)
    issuer = certificate.Issuer(core_keypair)
    keypairs = {}
    for pos, (cell_id, location) in enumerate(cells):
        kp = crypto.generate_keypair(core_keypair.suite_id, seed=1000 + pos)
        csr = certificate.build_csr(cell_id, kp, location, validity)
        chain = ledger.append_certificate(chain, issuer.sign_csr(csr), core_keypair,
                                          timestamp=NOW - 3600)
        keypairs[cell_id] = kp
    return chain, keypairs


@pytest.fixture(scope="session")
def small_ledger(core_keypair, validity):
    cells = [
        (0x1A2B3C, BS_LOCATION),
        (0x1A2B3D, (38.8440, -104.8000)),
        (0x1A2B3E, (38.9000, -104.7000)),
    ]
    return build_ledger(core_keypair, validity, cells)
