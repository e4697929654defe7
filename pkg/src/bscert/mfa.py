"""Sequential multi-factor authentication at the user equipment.

Factors run strictly in the order: cell-ID registration lookup, location
cross-check against the certificate, timestamp freshness, then signature
verification. The first failing factor short-circuits the rest; the verdict A
is true only when every factor passes. Both thresholds are inclusive (a
distance of exactly tau_d passes), and a timestamp from the future fails the
freshness check: accepting it would let an attacker pre-date replays.

All functions are pure over immutable inputs, so many simulated UEs can
evaluate in parallel. The optional strict nonce window is the one stateful
helper and is per-UE.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from math import asin, cos, radians, sin, sqrt
from typing import Optional

from .certificate import Location, validate_location
from .crypto import PublicKey
from .ledger import Ledger, lookup
from .rrc import SignedSib1, verify_sib1

EARTH_RADIUS_M = 6_371_000.0

HAVERSINE = "haversine"
EQUIRECTANGULAR = "equirectangular"
_DISTANCE_METHODS = (HAVERSINE, EQUIRECTANGULAR)


class FailedFactor(str, Enum):
    NONE = "none"
    ID_NOT_FOUND = "id_not_found"
    LOCATION_FAIL = "location_fail"
    TIME_FAIL = "time_fail"
    SIGNATURE_FAIL = "signature_fail"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


@dataclass(frozen=True)
class Thresholds:
    """UE-chosen control parameters: distance in meters, freshness in seconds."""

    tau_d: float
    tau_t: float

    def __post_init__(self) -> None:
        if self.tau_d < 0:
            raise ValueError(f"tau_d must be >= 0, got {self.tau_d}")
        if self.tau_t < 0:
            raise ValueError(f"tau_t must be >= 0, got {self.tau_t}")


@dataclass(frozen=True)
class SensedContext:
    """What the UE measures on its own: its location and the reception time."""

    sensed_location: Location
    sensed_time: float

    def __post_init__(self) -> None:
        validate_location(self.sensed_location)


@dataclass(frozen=True)
class AuthResult:
    """Verdict plus the factor that stopped the sequence.

    distance_m and time_delta_s are populated only once their factor was
    actually evaluated; a short-circuit leaves the later ones None.
    """

    ok: bool
    failed_factor: FailedFactor
    distance_m: Optional[float] = None
    time_delta_s: Optional[float] = None

    def to_json(self) -> dict:
        return {
            "A": self.ok,
            "failed_factor": self.failed_factor.value,
            "d_meters": self.distance_m,
            "delta_t_seconds": self.time_delta_s,
        }


def distance(a: Location, b: Location, method: str = HAVERSINE) -> float:
    """Distance in meters between two (lat, lon) points.

    Haversine great-circle by default; the equirectangular option is the
    planar approximation, adequate for sub-kilometer cells.
    """
    validate_location(a)
    validate_location(b)
    if method not in _DISTANCE_METHODS:
        raise ValueError(f"unknown distance method {method!r}")
    lat1, lon1 = radians(a[0]), radians(a[1])
    lat2, lon2 = radians(b[0]), radians(b[1])
    if method == EQUIRECTANGULAR:
        x = (lon2 - lon1) * cos((lat1 + lat2) / 2.0)
        y = lat2 - lat1
        return EARTH_RADIUS_M * sqrt(x * x + y * y)
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = sin(dlat / 2.0) ** 2 + cos(lat1) * cos(lat2) * sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * asin(min(1.0, sqrt(h)))


def verify_id(ledger: Ledger, claimed: int) -> Optional[tuple[PublicKey, Location]]:
    """Registration lookup: the certificate's key and location on a match."""
    cert = lookup(ledger, claimed)
    if cert is None:
        return None
    return cert.body.subject_public_key, cert.body.location


def verify_location(
    certificate_location: Location,
    sensed_location: Location,
    tau_d: float,
    method: str = HAVERSINE,
) -> tuple[bool, float]:
    d = distance(certificate_location, sensed_location, method)
    return d <= tau_d, d


def verify_time(t: float, t_bar: float, tau_t: float) -> tuple[bool, float]:
    delta = t_bar - t
    return 0.0 <= delta <= tau_t, delta


class NonceWindow:
    """Strict-mode replay tracker: recent (cell_id, nonce) pairs per tau_t.

    Default operation leaves this off; the timestamp alone governs freshness,
    and an in-threshold replay is indistinguishable from (and as useful as) a
    legitimate rebroadcast. Strict mode rejects exact duplicates seen within
    the freshness window.
    """

    def __init__(self) -> None:
        self._seen: deque[tuple[float, int, int]] = deque()

    def check_and_record(self, cell_id: int, nonce: int, now: float, tau_t: float) -> bool:
        """True if (cell_id, nonce) is fresh; records it either way."""
        while self._seen and self._seen[0][0] < now - tau_t:
            self._seen.popleft()
        duplicate = any(
            entry[1] == cell_id and entry[2] == nonce for entry in self._seen
        )
        self._seen.append((now, cell_id, nonce))
        return not duplicate


def authenticate(
    ledger: Ledger,
    frame: SignedSib1,
    claimed: int,
    ctx: SensedContext,
    thresholds: Thresholds,
    distance_method: str = HAVERSINE,
    nonce_window: Optional[NonceWindow] = None,
) -> AuthResult:
    """Run the four factors in order and report the verdict.

    Every failure is a result value, never an exception: the inputs are
    attacker-controlled broadcast material.
    """
    hit = verify_id(ledger, claimed)
    if hit is None:
        return AuthResult(False, FailedFactor.ID_NOT_FOUND)
    bs_key, bs_location = hit

    loc_ok, d = verify_location(
        bs_location, ctx.sensed_location, thresholds.tau_d, distance_method
    )
    if not loc_ok:
        return AuthResult(False, FailedFactor.LOCATION_FAIL, distance_m=d)

    time_ok, delta = verify_time(frame.timestamp, ctx.sensed_time, thresholds.tau_t)
    if not time_ok:
        return AuthResult(False, FailedFactor.TIME_FAIL, distance_m=d, time_delta_s=delta)
    if nonce_window is not None and not nonce_window.check_and_record(
        claimed, frame.nonce, ctx.sensed_time, thresholds.tau_t
    ):
        # Duplicate nonce inside the window reads as a freshness failure.
        return AuthResult(False, FailedFactor.TIME_FAIL, distance_m=d, time_delta_s=delta)

    if not verify_sib1(bs_key, frame):
        return AuthResult(
            False, FailedFactor.SIGNATURE_FAIL, distance_m=d, time_delta_s=delta
        )
    return AuthResult(True, FailedFactor.NONE, distance_m=d, time_delta_s=delta)
