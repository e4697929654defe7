"""Test-only reference implementations, kept independent of the package code.

These exist so expected values in the tests come from a second route: the
haversine here uses the atan2 formulation (the package uses asin), and the
conjunction oracle evaluates all four authentication factors independently
instead of sequentially.
"""

from __future__ import annotations

import struct
from math import atan2, cos, radians, sin, sqrt

from bscert import crypto

EARTH_RADIUS_M = 6_371_000.0


def haversine_m(a: tuple[float, float], b: tuple[float, float]) -> float:
    lat1, lon1, lat2, lon2 = map(radians, (a[0], a[1], b[0], b[1]))
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = sin(dlat / 2) ** 2 + cos(lat1) * cos(lat2) * sin(dlon / 2) ** 2
    return EARTH_RADIUS_M * 2 * atan2(sqrt(h), sqrt(1 - h))


def conjunction_verdict(ledger, frame, claimed, ctx, thresholds) -> bool:
    """AND of the four factors, each computed without short-circuiting."""
    cert = None
    for block in ledger.blocks[1:]:  # skip genesis; linear scan, no index
        if block.payload.body.subject_cell_id == claimed:
            cert = block.payload
    id_ok = cert is not None
    if cert is not None:
        loc_ok = haversine_m(cert.body.location, ctx.sensed_location) <= thresholds.tau_d
        message = frame.payload.base_fields + struct.pack(
            ">II", frame.nonce, frame.timestamp
        )
        try:
            sig_ok = crypto.verify(
                cert.body.subject_public_key, message, frame.signature
            )
        except crypto.SuiteMismatchError:
            sig_ok = False
    else:
        loc_ok = sig_ok = False
    delta = ctx.sensed_time - frame.timestamp
    time_ok = 0.0 <= delta <= thresholds.tau_t
    return id_ok and loc_ok and time_ok and sig_ok
