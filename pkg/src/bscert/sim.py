"""Deterministic desk-scale harness: core network, base stations, UEs, attackers.

One scenario is one single-threaded event loop over a virtual clock; nothing
sleeps, and a fixed seed reproduces the report byte for byte. Broadcast rounds
land on whole-second boundaries so the 32-bit Unix-seconds timestamp in each
frame stays faithful while thresholds keep sub-second resolution.

Wall-clock time appears only in benchmark_verification; scenario reports carry
modeled timings (a configurable per-verification cost), which keeps them
reproducible and makes the energy ratio equal the time ratio by construction.
"""

from __future__ import annotations

import io
import json
import logging
import math
import random
import statistics
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from . import certificate, ledger as ledger_mod, mfa, rrc
from .certificate import IssuancePolicy, Issuer, Location, Validity
from .crypto import KeyPair, PublicKey, SuiteId, generate_keypair, get_suite
from .ledger import Ledger, append_certificate, create_genesis, verify_chain
from .mfa import FailedFactor, NonceWindow, SensedContext, Thresholds
from .rrc import (
    DEFAULT_BASE_SIZE,
    Sib1Payload,
    SignedSib1,
    SotaCredential,
    SotaSib1,
    build_sota_chain,
    sign_sib1,
    sign_sota_sib1,
    verify_sota_sib1,
)

logger = logging.getLogger(__name__)


class ConfigError(Exception):
    """Scenario configuration problem, with the offending field path."""


class SyncError(Exception):
    """Offline ledger delivery rejected (chain verification failed)."""


class ChannelKind(str, Enum):
    ADHOC_WIFI = "adhoc_wifi"
    ADHOC_BLUETOOTH = "adhoc_bluetooth"
    CLOUD_TCP = "cloud_tcp"


@dataclass(frozen=True)
class ChannelProfile:
    """Offline delivery channel: mean latency plus optional gaussian jitter."""

    name: str
    kind: ChannelKind
    latency_s: float
    jitter_s: float = 0.0

    def __post_init__(self) -> None:
        if self.latency_s <= 0:
            raise ValueError(f"channel latency must be positive, got {self.latency_s}")
        if self.jitter_s < 0:
            raise ValueError(f"channel jitter must be >= 0, got {self.jitter_s}")


# Measured delivery latencies for the four reference channels.
DEFAULT_CHANNELS: dict[str, ChannelProfile] = {
    "adhoc_wifi": ChannelProfile("adhoc_wifi", ChannelKind.ADHOC_WIFI, 0.03222),
    "adhoc_bluetooth": ChannelProfile("adhoc_bluetooth", ChannelKind.ADHOC_BLUETOOTH, 1.0702),
    "cloud_iowa": ChannelProfile("cloud_iowa", ChannelKind.CLOUD_TCP, 0.05223),
    "cloud_singapore": ChannelProfile("cloud_singapore", ChannelKind.CLOUD_TCP, 1.06005),
}

# RRC connection-setup durations by channel quality class (milliseconds).
DEFAULT_RRC_PHASES_MS: dict[str, float] = {
    "good": 251.58,
    "medium": 300.90,
    "poor": 304.11,
}

DEFAULT_PER_VERIFICATION_MS = 4.744  # modeled single signature verification at the UE


def rrc_phase_model(quality: str, table: Optional[dict[str, float]] = None) -> float:
    """Modeled RRC setup duration in ms for a channel quality class."""
    phases = DEFAULT_RRC_PHASES_MS if table is None else table
    try:
        return phases[quality]
    except KeyError:
        raise ValueError(
            f"unknown channel quality {quality!r}; expected one of {sorted(phases)}"
        ) from None


class AttackerMode(str, Enum):
    NEW_BS = "new_bs"
    SPOOF_RESIGN = "spoof_resign"
    SPOOF_FORGE = "spoof_forge"
    REPLAY = "replay"
    WORMHOLE = "wormhole"


_ATTACK_EMIT_DELAY_S = 0.001  # in-round retransmission lag for crafted frames


# -- configuration -----------------------------------------------------------

_REQUIRED = object()


def _take(mapping: dict, key: str, path: str, default: Any = _REQUIRED) -> Any:
    if key in mapping:
        return mapping[key]
    if default is _REQUIRED:
        raise ConfigError(f"{path}.{key}: required field is missing")
    return default


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _integer(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return value


def _string(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string, got {value!r}")
    return value


def _location(mapping: dict, path: str) -> Location:
    lat = _number(_take(mapping, "latitude", path), f"{path}.latitude")
    lon = _number(_take(mapping, "longitude", path), f"{path}.longitude")
    try:
        certificate.validate_location((lat, lon))
    except certificate.CoordinateError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return (lat, lon)


@dataclass(frozen=True)
class BaseStationConfig:
    cell_id: int
    location: Location
    tx_power_dbm: float = 30.0
    suite: Optional[SuiteId] = None  # None: the scenario-wide suite


@dataclass(frozen=True)
class UeConfig:
    name: str
    location: Location
    tau_d: float = 2000.0
    tau_t: float = 0.5
    scheme: rrc.Scheme = rrc.Scheme.OURS
    sensing_noise_m: float = 0.0
    strict_nonce: bool = False


@dataclass(frozen=True)
class AttackerConfig:
    mode: AttackerMode
    location: Location
    tx_power_dbm: float = 40.0
    target_cell_id: Optional[int] = None
    fabricated_cell_id: Optional[int] = None
    replay_delay_s: float = 2.0
    capture_location: Optional[Location] = None  # wormhole listening point


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    iterations: int = 10
    start_time: int = 1_700_000_000
    sib1_period_s: float = 1.0
    suite: SuiteId = SuiteId.ECDSA_224
    base_size: int = DEFAULT_BASE_SIZE
    reception_range_m: float = 5000.0
    channel: ChannelProfile = DEFAULT_CHANNELS["adhoc_wifi"]
    source: str = "third_party"
    issuer_id: str = "core-network"
    validity_years: float = 1.0
    distance_method: str = mfa.HAVERSINE
    rrc_quality: str = "good"
    per_verification_ms: float = DEFAULT_PER_VERIFICATION_MS
    power_constant_mw: float = 1000.0
    base_stations: tuple[BaseStationConfig, ...] = ()
    ues: tuple[UeConfig, ...] = ()
    attackers: tuple[AttackerConfig, ...] = ()
    expectations: dict = field(default_factory=dict)


_EXPECTATION_KEYS = {
    "legit_acceptance",
    "attack_acceptance",
    "attack_failed_factor",
    "sota_attack_acceptance",
}


def _parse_base_station(raw: dict, path: str) -> BaseStationConfig:
    cell_id = _integer(_take(raw, "cell_id", path), f"{path}.cell_id")
    if not 0 < cell_id <= certificate.MAX_CELL_ID:
        raise ConfigError(f"{path}.cell_id: must be a positive 36-bit id")
    suite = None
    if "suite" in raw:
        try:
            parsed = get_suite(_string(raw["suite"], f"{path}.suite"))
        except Exception:
            raise ConfigError(f"{path}.suite: unknown signature suite") from None
        if not parsed.available:
            raise ConfigError(f"{path}.suite: {parsed.suite_id.value} has no runtime backend")
        suite = parsed.suite_id
    return BaseStationConfig(
        cell_id=cell_id,
        location=_location(raw, path),
        tx_power_dbm=_number(_take(raw, "tx_power_dbm", path, 30.0), f"{path}.tx_power_dbm"),
        suite=suite,
    )


def _parse_ue(raw: dict, path: str, position: int) -> UeConfig:
    scheme_raw = _string(_take(raw, "scheme", path, "ours"), f"{path}.scheme")
    try:
        scheme = rrc.Scheme(scheme_raw)
    except ValueError:
        raise ConfigError(f"{path}.scheme: must be 'ours' or 'sota'") from None
    tau_d = _number(_take(raw, "tau_d", path, 2000.0), f"{path}.tau_d")
    tau_t = _number(_take(raw, "tau_t", path, 0.5), f"{path}.tau_t")
    noise = _number(_take(raw, "sensing_noise_m", path, 0.0), f"{path}.sensing_noise_m")
    if tau_d < 0 or tau_t < 0 or noise < 0:
        raise ConfigError(f"{path}: tau_d, tau_t, sensing_noise_m must be >= 0")
    return UeConfig(
        name=_string(_take(raw, "name", path, f"ue-{position}"), f"{path}.name"),
        location=_location(raw, path),
        tau_d=tau_d,
        tau_t=tau_t,
        scheme=scheme,
        sensing_noise_m=noise,
        strict_nonce=bool(_take(raw, "strict_nonce", path, False)),
    )


def _parse_attacker(raw: dict, path: str,
                    stations: tuple[BaseStationConfig, ...]) -> AttackerConfig:
    mode_raw = _string(_take(raw, "mode", path), f"{path}.mode")
    try:
        mode = AttackerMode(mode_raw)
    except ValueError:
        raise ConfigError(
            f"{path}.mode: unknown mode {mode_raw!r}; "
            f"expected one of {[m.value for m in AttackerMode]}"
        ) from None

    target: Optional[int] = None
    if mode is not AttackerMode.NEW_BS:
        if not stations:
            raise ConfigError(f"{path}: mode {mode.value} needs a base station to target")
        target = _take(raw, "target_cell_id", path, stations[0].cell_id)
        target = _integer(target, f"{path}.target_cell_id")
        if target not in {bs.cell_id for bs in stations}:
            raise ConfigError(f"{path}.target_cell_id: {target:#x} is not a configured station")
    target_bs = next((bs for bs in stations if bs.cell_id == target), None)

    fabricated = raw.get("fabricated_cell_id")
    if mode is AttackerMode.NEW_BS:
        if fabricated is None:
            raise ConfigError(f"{path}.fabricated_cell_id: required for new_bs")
        fabricated = _integer(fabricated, f"{path}.fabricated_cell_id")
        if any(bs.cell_id == fabricated for bs in stations):
            raise ConfigError(f"{path}.fabricated_cell_id: collides with a registered cell")

    if "latitude" in raw or "longitude" in raw:
        location = _location(raw, path)
    elif target_bs is not None:
        location = target_bs.location
    else:
        raise ConfigError(f"{path}: latitude/longitude required for mode {mode.value}")

    capture: Optional[Location] = None
    if mode is AttackerMode.WORMHOLE:
        if "capture_latitude" in raw or "capture_longitude" in raw:
            capture = (
                _number(_take(raw, "capture_latitude", path), f"{path}.capture_latitude"),
                _number(_take(raw, "capture_longitude", path), f"{path}.capture_longitude"),
            )
            try:
                certificate.validate_location(capture)
            except certificate.CoordinateError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        else:
            capture = target_bs.location if target_bs else None
        if capture == location:
            raise ConfigError(f"{path}: wormhole capture and replay locations must differ")

    delay = _number(_take(raw, "replay_delay_s", path, 2.0), f"{path}.replay_delay_s")
    if delay < 0:
        raise ConfigError(f"{path}.replay_delay_s: must be >= 0")

    return AttackerConfig(
        mode=mode,
        location=location,
        tx_power_dbm=_number(_take(raw, "tx_power_dbm", path, 40.0), f"{path}.tx_power_dbm"),
        target_cell_id=target,
        fabricated_cell_id=fabricated,
        replay_delay_s=delay,
        capture_location=capture,
    )


def scenario_from_dict(raw: dict) -> ScenarioConfig:
    """Validate a parsed TOML/JSON document into a ScenarioConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a table/object")

    path = "config"
    seed = _integer(_take(raw, "seed", path, 0), "config.seed")
    iterations = _integer(_take(raw, "iterations", path, 10), "config.iterations")
    if iterations <= 0:
        raise ConfigError("config.iterations: must be positive")
    period = _number(_take(raw, "sib1_period_s", path, 1.0), "config.sib1_period_s")
    if period <= 0:
        raise ConfigError("config.sib1_period_s: must be positive")
    start_time = _integer(_take(raw, "start_time", path, 1_700_000_000), "config.start_time")
    base_size = _integer(_take(raw, "base_size", path, DEFAULT_BASE_SIZE), "config.base_size")
    if base_size < 8:
        raise ConfigError("config.base_size: must be >= 8 to embed the cell id")
    try:
        suite = get_suite(_string(_take(raw, "suite", path, "ecdsa-224"), "config.suite"))
    except Exception:
        raise ConfigError("config.suite: unknown signature suite") from None
    if not suite.available:
        raise ConfigError(f"config.suite: {suite.suite_id.value} has no runtime backend")
    ours_size = rrc.encoded_size(rrc.Scheme.OURS, suite.suite_id, base_size)
    if not rrc.check_budget(ours_size):
        raise ConfigError(
            f"config.base_size: signed SIB1 would be {ours_size} bytes, over the "
            f"{rrc.SIB1_SIZE_LIMIT}-byte transport cap"
        )
    rng_range = _number(_take(raw, "reception_range_m", path, 5000.0), "config.reception_range_m")
    if rng_range <= 0:
        raise ConfigError("config.reception_range_m: must be positive")

    channel_raw = _take(raw, "channel", path, "adhoc_wifi")
    if isinstance(channel_raw, str):
        if channel_raw not in DEFAULT_CHANNELS:
            raise ConfigError(
                f"config.channel: unknown channel {channel_raw!r}; "
                f"expected one of {sorted(DEFAULT_CHANNELS)} or an inline profile"
            )
        channel = DEFAULT_CHANNELS[channel_raw]
    elif isinstance(channel_raw, dict):
        # inline profile; jitter stays opt-in
        kind_raw = _string(_take(channel_raw, "kind", "config.channel", "cloud_tcp"),
                           "config.channel.kind")
        try:
            kind = ChannelKind(kind_raw)
        except ValueError:
            raise ConfigError(
                f"config.channel.kind: expected one of {[k.value for k in ChannelKind]}"
            ) from None
        try:
            channel = ChannelProfile(
                name=_string(_take(channel_raw, "name", "config.channel", "custom"),
                             "config.channel.name"),
                kind=kind,
                latency_s=_number(_take(channel_raw, "latency_s", "config.channel"),
                                  "config.channel.latency_s"),
                jitter_s=_number(_take(channel_raw, "jitter_s", "config.channel", 0.0),
                                 "config.channel.jitter_s"),
            )
        except ValueError as exc:
            raise ConfigError(f"config.channel: {exc}") from None
    else:
        raise ConfigError("config.channel: expected a channel name or an inline profile")
    source = _string(_take(raw, "source", path, "third_party"), "config.source")
    if source not in ("third_party", "cloud"):
        raise ConfigError("config.source: must be 'third_party' or 'cloud'")

    distance_method = _string(
        _take(raw, "distance_method", path, mfa.HAVERSINE), "config.distance_method"
    )
    if distance_method not in (mfa.HAVERSINE, mfa.EQUIRECTANGULAR):
        raise ConfigError("config.distance_method: must be 'haversine' or 'equirectangular'")
    rrc_quality = _string(_take(raw, "rrc_quality", path, "good"), "config.rrc_quality")
    if rrc_quality not in DEFAULT_RRC_PHASES_MS:
        raise ConfigError(f"config.rrc_quality: expected one of {sorted(DEFAULT_RRC_PHASES_MS)}")

    core_raw = _take(raw, "core", path, {})
    if not isinstance(core_raw, dict):
        raise ConfigError("config.core: expected a table/object")
    issuer_id = _string(_take(core_raw, "issuer_id", "config.core", "core-network"),
                        "config.core.issuer_id")
    validity_years = _number(_take(core_raw, "validity_years", "config.core", 1.0),
                             "config.core.validity_years")
    if validity_years <= 0:
        raise ConfigError("config.core.validity_years: must be positive")

    stations_raw = _take(raw, "base_stations", path, [])
    if not isinstance(stations_raw, list):
        raise ConfigError("config.base_stations: expected an array")
    stations = tuple(
        _parse_base_station(item, f"config.base_stations[{i}]")
        for i, item in enumerate(stations_raw)
    )
    if len({bs.cell_id for bs in stations}) != len(stations):
        raise ConfigError("config.base_stations: duplicate cell_id")
    for i, bs in enumerate(stations):
        if bs.suite is not None:
            size = rrc.encoded_size(rrc.Scheme.OURS, bs.suite, base_size)
            if not rrc.check_budget(size):
                raise ConfigError(
                    f"config.base_stations[{i}].suite: signed SIB1 would be "
                    f"{size} bytes, over the {rrc.SIB1_SIZE_LIMIT}-byte cap"
                )

    ues_raw = _take(raw, "ues", path, [])
    if not isinstance(ues_raw, list):
        raise ConfigError("config.ues: expected an array")
    ues = tuple(_parse_ue(item, f"config.ues[{i}]", i) for i, item in enumerate(ues_raw))
    if not ues:
        raise ConfigError("config.ues: at least one UE is required")
    if any(ue.scheme is rrc.Scheme.SOTA for ue in ues):
        sota_size = rrc.encoded_size(rrc.Scheme.SOTA, suite.suite_id, base_size)
        if not rrc.check_budget(sota_size):
            # Still simulated: demonstrating that the in-band layout cannot
            # fit is part of the comparison.
            logger.warning(
                "sota frames are %d bytes, over the %d-byte transport cap",
                sota_size, rrc.SIB1_SIZE_LIMIT,
            )

    attackers_raw = _take(raw, "attackers", path, [])
    if not isinstance(attackers_raw, list):
        raise ConfigError("config.attackers: expected an array")
    attackers = tuple(
        _parse_attacker(item, f"config.attackers[{i}]", stations)
        for i, item in enumerate(attackers_raw)
    )

    expectations = _take(raw, "expectations", path, {})
    if not isinstance(expectations, dict):
        raise ConfigError("config.expectations: expected a table/object")
    unknown = set(expectations) - _EXPECTATION_KEYS
    if unknown:
        raise ConfigError(
            f"config.expectations: unknown keys {sorted(unknown)}; "
            f"expected among {sorted(_EXPECTATION_KEYS)}"
        )

    return ScenarioConfig(
        seed=seed,
        iterations=iterations,
        start_time=start_time,
        sib1_period_s=period,
        suite=suite.suite_id,
        base_size=base_size,
        reception_range_m=rng_range,
        channel=channel,
        source=source,
        issuer_id=issuer_id,
        validity_years=validity_years,
        distance_method=distance_method,
        rrc_quality=rrc_quality,
        per_verification_ms=_number(
            _take(raw, "per_verification_ms", path, DEFAULT_PER_VERIFICATION_MS),
            "config.per_verification_ms",
        ),
        power_constant_mw=_number(
            _take(raw, "power_constant_mw", path, 1000.0), "config.power_constant_mw"
        ),
        base_stations=stations,
        ues=ues,
        attackers=attackers,
        expectations=dict(expectations),
    )


# -- entities ----------------------------------------------------------------

class UserEquipment:
    """UE-side state: the USIM trust anchor, the synced ledger, thresholds."""

    def __init__(self, cfg: UeConfig, core_public_key: PublicKey,
                 distance_method: str) -> None:
        self.cfg = cfg
        self.core_public_key = core_public_key
        self.distance_method = distance_method
        self.ledger: Optional[Ledger] = None
        self.thresholds = Thresholds(tau_d=cfg.tau_d, tau_t=cfg.tau_t)
        self.nonce_window = NonceWindow() if cfg.strict_nonce else None

    @property
    def name(self) -> str:
        return self.cfg.name


def offline_sync(
    ue: UserEquipment,
    source: str,
    channel: ChannelProfile,
    ledger: Ledger,
    rng: Optional[random.Random] = None,
) -> tuple[Ledger, float]:
    """Deliver the ledger offline; the UE verifies the chain before adopting it.

    A tampered or wrongly anchored ledger raises SyncError and the UE keeps
    whatever copy it already had.
    """
    check = verify_chain(ledger, ue.core_public_key)
    if not check:
        raise SyncError(
            f"ledger from {source} rejected at height {check.first_bad_height}: "
            f"{check.reason}"
        )
    latency = channel.latency_s
    if channel.jitter_s > 0 and rng is not None:
        latency = max(0.0, latency + rng.gauss(0.0, channel.jitter_s))
    ue.ledger = ledger
    return ledger, latency


def _offset_location(location: Location, east_m: float, north_m: float) -> Location:
    lat, lon = location
    dlat = math.degrees(north_m / mfa.EARTH_RADIUS_M)
    denom = mfa.EARTH_RADIUS_M * max(math.cos(math.radians(lat)), 1e-9)
    dlon = math.degrees(east_m / denom)
    return (lat + dlat, lon + dlon)


def _sense_location(ue: UserEquipment, rng: random.Random) -> Location:
    noise = ue.cfg.sensing_noise_m
    if noise <= 0:
        return ue.cfg.location
    # Uniform in a disk of radius noise: bounded error, so the triangle
    # inequality argument for tau_d/2 placement holds.
    r = noise * math.sqrt(rng.random())
    theta = rng.random() * 2.0 * math.pi
    return _offset_location(ue.cfg.location, r * math.cos(theta), r * math.sin(theta))


def _signal_dbm(tx_power_dbm: float, distance_m: float) -> float:
    # Ordinal log-distance score; only the ranking matters.
    return tx_power_dbm - 20.0 * math.log10(max(distance_m, 1.0))


@dataclass(frozen=True)
class Emission:
    """One over-the-air SIB1 transmission (possibly attacker-crafted)."""

    time: float
    tx_location: Location
    tx_power_dbm: float
    source_kind: str  # "base_station" | "attacker"
    source_label: str
    claimed_cell_id: int
    attack: bool
    ours_frame: Optional[SignedSib1] = None
    sota_frame: Optional[SotaSib1] = None


@dataclass
class _StationState:
    cfg: BaseStationConfig
    keypair: KeyPair
    payload: Sib1Payload
    sota_creds: Optional[tuple[SotaCredential, SotaCredential]] = None


def _mutate_filler(payload: Sib1Payload, rng: random.Random) -> Sib1Payload:
    # Flip one bit outside the embedded cell id: a fabricated SIB1 body that
    # still claims the same cell.
    body = bytearray(payload.base_fields)
    pos = rng.randrange(8, len(body)) if len(body) > 8 else rng.randrange(len(body))
    body[pos] ^= 1 << rng.randrange(8)
    if pos < 8:
        cell_id = int.from_bytes(body[:8], "big")
    else:
        cell_id = payload.cell_id
    return Sib1Payload(cell_id=cell_id, base_fields=bytes(body))


@dataclass
class ScenarioReport:
    """Everything a run produced; serializes deterministically to JSON."""

    config_echo: dict
    offline: dict
    frames: list[dict]
    attachments: list[dict]
    summary: dict
    verification: dict
    modeled: dict
    expectation_results: list[dict]

    @property
    def ok(self) -> bool:
        return all(item["ok"] for item in self.expectation_results)

    def to_json_dict(self) -> dict:
        return {
            "config": self.config_echo,
            "offline": self.offline,
            "frames": self.frames,
            "attachments": self.attachments,
            "summary": self.summary,
            "verification": self.verification,
            "modeled": self.modeled,
            "expectations": self.expectation_results,
            "ok": self.ok,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"


def _rate(accepted: int, received: int) -> Optional[float]:
    return accepted / received if received else None


def run_scenario(config: ScenarioConfig) -> ScenarioReport:
    """Execute one scenario end to end on the virtual clock."""
    rng = random.Random(config.seed)
    start = float(config.start_time)
    period = config.sib1_period_s

    # Offline phase: key material, certificates, ledger.
    core_kp = generate_keypair(config.suite, seed=rng.getrandbits(63))
    validity = Validity(
        config.start_time - 3600,
        config.start_time + int(config.validity_years * ledger_mod.SECONDS_PER_YEAR),
    )
    core_cert = certificate.make_self_certificate(core_kp, config.issuer_id, validity)
    chain = create_genesis(core_kp, core_cert, timestamp=config.start_time - 3600)
    issuer = Issuer(core_kp, IssuancePolicy(issuer_id=config.issuer_id))

    any_sota = any(ue.scheme is rrc.Scheme.SOTA for ue in config.ues)
    intermediary_kp = generate_keypair(config.suite, seed=rng.getrandbits(63)) if any_sota else None

    stations: dict[int, _StationState] = {}
    for bs_cfg in config.base_stations:
        bs_kp = generate_keypair(bs_cfg.suite or config.suite, seed=rng.getrandbits(63))
        csr = certificate.build_csr(bs_cfg.cell_id, bs_kp, bs_cfg.location, validity)
        cert = issuer.sign_csr(csr)
        chain = append_certificate(chain, cert, core_kp, timestamp=config.start_time - 3600)
        creds = build_sota_chain(core_kp, intermediary_kp, bs_kp) if any_sota else None
        stations[bs_cfg.cell_id] = _StationState(
            cfg=bs_cfg,
            keypair=bs_kp,
            payload=Sib1Payload.build(bs_cfg.cell_id, config.base_size),
            sota_creds=creds,
        )

    attacker_keys = [
        generate_keypair(config.suite, seed=rng.getrandbits(63))
        for _ in config.attackers
    ]
    for idx, atk in enumerate(config.attackers):
        if atk.mode is AttackerMode.WORMHOLE:
            capture_d = mfa.distance(
                stations[atk.target_cell_id].cfg.location,
                atk.capture_location, config.distance_method,
            )
            if capture_d > config.reception_range_m:
                raise ConfigError(
                    f"config.attackers[{idx}]: wormhole capture point is "
                    f"{capture_d:.0f} m from the target station, outside its "
                    f"{config.reception_range_m:.0f} m reception range"
                )

    # Offline delivery to every UE.
    ues = [UserEquipment(cfg, core_kp.public, config.distance_method) for cfg in config.ues]
    offline_latencies = {}
    for ue in ues:
        _, latency = offline_sync(ue, config.source, config.channel, chain, rng)
        offline_latencies[ue.name] = latency

    # Generation pass: all emissions for all rounds, in deterministic order.
    emissions: list[tuple[float, int, Emission]] = []
    seq = 0

    def _emit(emission: Emission) -> None:
        nonlocal seq
        emissions.append((emission.time, seq, emission))
        seq += 1

    for round_no in range(config.iterations):
        now = start + round_no * period
        t_stamp = int(now)
        round_frames: dict[int, Emission] = {}
        for cell_id, st in stations.items():
            nonce = rng.getrandbits(32)
            ours = sign_sib1(st.keypair, st.payload, nonce, t_stamp)
            sota = None
            if st.sota_creds is not None:
                inter_cred, bs_cred = st.sota_creds
                sota = sign_sota_sib1(st.keypair, inter_cred, bs_cred,
                                      st.payload, nonce, t_stamp)
            emission = Emission(
                time=now,
                tx_location=st.cfg.location,
                tx_power_dbm=st.cfg.tx_power_dbm,
                source_kind="base_station",
                source_label=f"bs:{cell_id:#x}",
                claimed_cell_id=cell_id,
                attack=False,
                ours_frame=ours,
                sota_frame=sota,
            )
            round_frames[cell_id] = emission
            _emit(emission)

        for idx, atk in enumerate(config.attackers):
            label = f"attacker:{atk.mode.value}[{idx}]"
            kp = attacker_keys[idx]
            if atk.mode is AttackerMode.NEW_BS:
                payload = Sib1Payload.build(atk.fabricated_cell_id, config.base_size)
                nonce = rng.getrandbits(32)
                ours = sign_sib1(kp, payload, nonce, t_stamp)
                sota = None
                if any_sota:
                    # Self-made chain: the attacker cannot forge the core
                    # network's credential signature.
                    fake_inter, fake_bs = build_sota_chain(kp, kp, kp)
                    sota = sign_sota_sib1(kp, fake_inter, fake_bs, payload, nonce, t_stamp)
                _emit(Emission(
                    time=now + _ATTACK_EMIT_DELAY_S,
                    tx_location=atk.location,
                    tx_power_dbm=atk.tx_power_dbm,
                    source_kind="attacker",
                    source_label=label,
                    claimed_cell_id=atk.fabricated_cell_id,
                    attack=True,
                    ours_frame=ours,
                    sota_frame=sota,
                ))
                continue

            captured = round_frames[atk.target_cell_id]
            target_state = stations[atk.target_cell_id]
            if atk.mode is AttackerMode.SPOOF_RESIGN:
                nonce = rng.getrandbits(32)
                ours = sign_sib1(kp, target_state.payload, nonce, t_stamp)
                sota = None
                if captured.sota_frame is not None:
                    sota = SotaSib1(
                        payload=target_state.payload,
                        nonce=nonce,
                        timestamp=t_stamp,
                        intermediary_credential=captured.sota_frame.intermediary_credential,
                        bs_credential=captured.sota_frame.bs_credential,
                        sib1_signature=ours.signature,
                    )
                _emit(Emission(
                    time=now + _ATTACK_EMIT_DELAY_S,
                    tx_location=atk.location,
                    tx_power_dbm=atk.tx_power_dbm,
                    source_kind="attacker",
                    source_label=label,
                    claimed_cell_id=atk.target_cell_id,
                    attack=True,
                    ours_frame=ours,
                    sota_frame=sota,
                ))
            elif atk.mode is AttackerMode.SPOOF_FORGE:
                forged = _mutate_filler(target_state.payload, rng)
                ours_src = captured.ours_frame
                ours = SignedSib1(payload=forged, nonce=ours_src.nonce,
                                  timestamp=ours_src.timestamp, signature=ours_src.signature)
                sota = None
                if captured.sota_frame is not None:
                    src = captured.sota_frame
                    sota = SotaSib1(
                        payload=forged, nonce=src.nonce, timestamp=src.timestamp,
                        intermediary_credential=src.intermediary_credential,
                        bs_credential=src.bs_credential,
                        sib1_signature=src.sib1_signature,
                    )
                _emit(Emission(
                    time=now + _ATTACK_EMIT_DELAY_S,
                    tx_location=atk.location,
                    tx_power_dbm=atk.tx_power_dbm,
                    source_kind="attacker",
                    source_label=label,
                    claimed_cell_id=forged.cell_id,
                    attack=True,
                    ours_frame=ours,
                    sota_frame=sota,
                ))
            elif atk.mode is AttackerMode.REPLAY:
                _emit(Emission(
                    time=now + atk.replay_delay_s,
                    tx_location=atk.location,
                    tx_power_dbm=atk.tx_power_dbm,
                    source_kind="attacker",
                    source_label=label,
                    claimed_cell_id=atk.target_cell_id,
                    attack=True,
                    ours_frame=captured.ours_frame,
                    sota_frame=captured.sota_frame,
                ))
            elif atk.mode is AttackerMode.WORMHOLE:
                _emit(Emission(
                    time=now + _ATTACK_EMIT_DELAY_S,
                    tx_location=atk.location,
                    tx_power_dbm=atk.tx_power_dbm,
                    source_kind="attacker",
                    source_label=label,
                    claimed_cell_id=atk.target_cell_id,
                    attack=True,
                    ours_frame=captured.ours_frame,
                    sota_frame=captured.sota_frame,
                ))

    emissions.sort(key=lambda item: (item[0], item[1]))
    sense_rng = random.Random(rng.getrandbits(63))
    logger.debug(
        "scenario seed=%d: %d emissions over %d rounds, ledger height %d",
        config.seed, len(emissions), config.iterations, chain.height,
    )

    # Delivery pass: every UE evaluates every emission it can hear.
    frames: list[dict] = []
    per_window: dict[tuple[str, int], list[tuple[float, int, str, bool]]] = {}
    ours_checks = sota_checks = 0
    ours_accepted = sota_accepted = 0
    ours_checks_accepted = sota_checks_accepted = 0

    for when, order, emission in emissions:
        window = int((when - start) // period)
        for ue in ues:
            true_d = mfa.distance(emission.tx_location, ue.cfg.location,
                                  config.distance_method)
            if true_d > config.reception_range_m:
                continue
            strength = _signal_dbm(emission.tx_power_dbm, true_d)
            ctx = SensedContext(
                sensed_location=_sense_location(ue, sense_rng),
                sensed_time=when,
            )
            record: dict[str, Any] = {
                "window": window,
                "time": when,
                "ue": ue.name,
                "scheme": ue.cfg.scheme.value,
                "source_kind": emission.source_kind,
                "source": emission.source_label,
                "attack": emission.attack,
                "claimed_cell_id": emission.claimed_cell_id,
                "strength_dbm": strength,
            }
            if ue.cfg.scheme is rrc.Scheme.OURS:
                result = mfa.authenticate(
                    ue.ledger, emission.ours_frame, emission.claimed_cell_id,
                    ctx, ue.thresholds,
                    distance_method=ue.distance_method,
                    nonce_window=ue.nonce_window,
                )
                checks = 1 if result.failed_factor in (FailedFactor.NONE,
                                                       FailedFactor.SIGNATURE_FAIL) else 0
                ours_checks += checks
                if result.ok:
                    ours_accepted += 1
                    ours_checks_accepted += checks
                record.update(result.to_json())
            else:
                result = _sota_authenticate(ue, emission.sota_frame, ctx)
                sota_checks += result[2]
                if result[0]:
                    sota_accepted += 1
                    sota_checks_accepted += result[2]
                record.update({
                    "A": result[0],
                    "failed_factor": result[1].value,
                    "d_meters": None,
                    "delta_t_seconds": result[3],
                })
            frames.append(record)
            per_window.setdefault((ue.name, window), []).append(
                (strength, order, emission.source_label, record["A"])
            )

    attachments = []
    for (ue_name, window), heard in sorted(per_window.items()):
        ranked = sorted(heard, key=lambda item: (-item[0], item[1]))
        attached = next((label for _, _, label, ok in ranked if ok), None)
        attachments.append({
            "ue": ue_name,
            "window": window,
            "attached": attached,
            "strongest": ranked[0][2],
        })

    legit_records = [f for f in frames if not f["attack"]]
    attack_ours = [f for f in frames if f["attack"] and f["scheme"] == "ours"]
    attack_sota = [f for f in frames if f["attack"] and f["scheme"] == "sota"]

    def _failed_histogram(records: list[dict]) -> dict[str, int]:
        hist: dict[str, int] = {}
        for rec in records:
            if not rec["A"]:
                hist[rec["failed_factor"]] = hist.get(rec["failed_factor"], 0) + 1
        return dict(sorted(hist.items()))

    summary = {
        "legit": {
            "received": len(legit_records),
            "accepted": sum(1 for f in legit_records if f["A"]),
            "acceptance_rate": _rate(sum(1 for f in legit_records if f["A"]),
                                     len(legit_records)),
        },
        "attack_ours": {
            "received": len(attack_ours),
            "accepted": sum(1 for f in attack_ours if f["A"]),
            "acceptance_rate": _rate(sum(1 for f in attack_ours if f["A"]),
                                     len(attack_ours)),
            "failed_factors": _failed_histogram(attack_ours),
        },
        "attack_sota": {
            "received": len(attack_sota),
            "accepted": sum(1 for f in attack_sota if f["A"]),
            "acceptance_rate": _rate(sum(1 for f in attack_sota if f["A"]),
                                     len(attack_sota)),
            "failed_factors": _failed_histogram(attack_sota),
        },
    }

    verification = {
        "ours_signature_checks": ours_checks,
        "sota_signature_checks": sota_checks,
        "ours_accepted_frames": ours_accepted,
        "sota_accepted_frames": sota_accepted,
        "ours_checks_per_accepted": (
            ours_checks_accepted / ours_accepted if ours_accepted else None
        ),
        "sota_checks_per_accepted": (
            sota_checks_accepted / sota_accepted if sota_accepted else None
        ),
    }

    per_ms = config.per_verification_ms
    rrc_ms = rrc_phase_model(config.rrc_quality)
    ours_time_ms = 1 * per_ms
    sota_time_ms = 3 * per_ms
    time_ratio = sota_time_ms / ours_time_ms
    modeled = {
        "per_verification_ms": per_ms,
        "ours_verify_time_ms_per_frame": ours_time_ms,
        "sota_verify_time_ms_per_frame": sota_time_ms,
        "time_ratio": time_ratio,
        "power_constant_mw": config.power_constant_mw,
        "ours_energy_mj_per_frame": config.power_constant_mw * ours_time_ms / 1000.0,
        "sota_energy_mj_per_frame": config.power_constant_mw * sota_time_ms / 1000.0,
        # energy = P * T with one shared power constant, so the ratio is the
        # time ratio by construction
        "energy_ratio": time_ratio,
        "rrc_phase_ms": rrc_ms,
        "verification_fraction_of_rrc": ours_time_ms / rrc_ms,
    }

    expectation_results = _evaluate_expectations(config.expectations, summary)

    ledger_size = len(_ledger_file_bytes(chain))
    report = ScenarioReport(
        config_echo={
            "seed": config.seed,
            "iterations": config.iterations,
            "suite": config.suite.value,
            "base_size": config.base_size,
            "sib1_period_s": config.sib1_period_s,
            "reception_range_m": config.reception_range_m,
            "channel": config.channel.name,
            "source": config.source,
            "base_stations": len(config.base_stations),
            "ues": len(config.ues),
            "attackers": [a.mode.value for a in config.attackers],
        },
        offline={
            "channel": config.channel.name,
            "latency_s": dict(sorted(offline_latencies.items())),
            "ledger_height": chain.height,
            "ledger_bytes": ledger_size,
        },
        frames=frames,
        attachments=attachments,
        summary=summary,
        verification=verification,
        modeled=modeled,
        expectation_results=expectation_results,
    )
    return report


def _ledger_file_bytes(chain: Ledger) -> bytes:
    buf = io.BytesIO()
    ledger_mod.export_ledger(chain, buf)
    return buf.getvalue()


def _sota_authenticate(
    ue: UserEquipment, frame: Optional[SotaSib1], ctx: SensedContext
) -> tuple[bool, FailedFactor, int, Optional[float]]:
    """Comparison-model verifier: shared n,t freshness plus the 3-signature chain.

    Returns (accepted, factor, signature_checks, delta_t).
    """
    if frame is None:
        return False, FailedFactor.SIGNATURE_FAIL, 0, None
    fresh, delta = mfa.verify_time(frame.timestamp, ctx.sensed_time, ue.thresholds.tau_t)
    if not fresh:
        return False, FailedFactor.TIME_FAIL, 0, delta
    outcome = verify_sota_sib1(ue.core_public_key, frame)
    if not outcome.ok:
        return False, FailedFactor.SIGNATURE_FAIL, outcome.signature_checks, delta
    return True, FailedFactor.NONE, outcome.signature_checks, delta


def _evaluate_expectations(expectations: dict, summary: dict) -> list[dict]:
    results = []

    def _add(name: str, expected: Any, actual: Any, ok: bool) -> None:
        results.append({"name": name, "expected": expected, "actual": actual, "ok": ok})

    if "legit_acceptance" in expectations:
        actual = summary["legit"]["acceptance_rate"]
        expected = expectations["legit_acceptance"]
        _add("legit_acceptance", expected, actual,
             actual is not None and abs(actual - expected) < 1e-12)
    if "attack_acceptance" in expectations:
        actual = summary["attack_ours"]["acceptance_rate"]
        expected = expectations["attack_acceptance"]
        _add("attack_acceptance", expected, actual,
             actual is not None and abs(actual - expected) < 1e-12)
    if "attack_failed_factor" in expectations:
        expected = expectations["attack_failed_factor"]
        hist = summary["attack_ours"]["failed_factors"]
        rejected = summary["attack_ours"]["received"] - summary["attack_ours"]["accepted"]
        _add("attack_failed_factor", expected, hist,
             rejected > 0 and set(hist) == {expected})
    if "sota_attack_acceptance" in expectations:
        actual = summary["attack_sota"]["acceptance_rate"]
        expected = expectations["sota_attack_acceptance"]
        _add("sota_attack_acceptance", expected, actual,
             actual is not None and abs(actual - expected) < 1e-12)
    return results


# -- wall-clock benchmark ----------------------------------------------------

@dataclass(frozen=True)
class BenchmarkResult:
    """Measured verification cost: one signature (ours) vs the 3-check chain."""

    suite: SuiteId
    iterations: int
    ours_verifications_per_frame: int
    sota_verifications_per_frame: int
    ours_mean_ms: float
    ours_ci95_ms: float
    sota_mean_ms: float
    sota_ci95_ms: float
    time_ratio: float
    energy_ratio: float  # P * T with the same P on both sides: equals time_ratio

    def to_json_dict(self) -> dict:
        return {
            "suite": self.suite.value,
            "iterations": self.iterations,
            "ours_verifications_per_frame": self.ours_verifications_per_frame,
            "sota_verifications_per_frame": self.sota_verifications_per_frame,
            "ours_mean_ms": self.ours_mean_ms,
            "ours_ci95_ms": self.ours_ci95_ms,
            "sota_mean_ms": self.sota_mean_ms,
            "sota_ci95_ms": self.sota_ci95_ms,
            "time_ratio": self.time_ratio,
            "energy_ratio": self.energy_ratio,
        }


def benchmark_verification(suite: "SuiteId | str", iterations: int) -> BenchmarkResult:
    """Time frame verification for both schemes over the same payload."""
    if iterations < 100:
        raise ValueError(f"iterations must be >= 100, got {iterations}")
    suite_id = get_suite(suite).suite_id

    core = generate_keypair(suite_id, seed=101)
    intermediary = generate_keypair(suite_id, seed=102)
    bs = generate_keypair(suite_id, seed=103)
    payload = Sib1Payload.build(0x1A2B3C, DEFAULT_BASE_SIZE)
    nonce, stamp = 7, 1_700_000_000
    ours_frame = sign_sib1(bs, payload, nonce, stamp)
    inter_cred, bs_cred = build_sota_chain(core, intermediary, bs)
    sota_frame = sign_sota_sib1(bs, inter_cred, bs_cred, payload, nonce, stamp)

    from .rrc import verify_sib1

    for _ in range(50):  # warm caches and frequency scaling
        assert verify_sib1(bs.public, ours_frame)
        assert verify_sota_sib1(core.public, sota_frame).ok

    # Alternate the two schemes so clock drift and scheduling noise land on
    # both sides of the ratio equally.
    ours_times = []
    sota_times = []
    for _ in range(iterations):
        t0 = time.perf_counter()
        ok = verify_sib1(bs.public, ours_frame)
        t1 = time.perf_counter()
        outcome = verify_sota_sib1(core.public, sota_frame)
        t2 = time.perf_counter()
        assert ok
        assert outcome.ok and outcome.signature_checks == 3
        ours_times.append(t1 - t0)
        sota_times.append(t2 - t1)

    def _stats(samples: list[float]) -> tuple[float, float]:
        mean = statistics.fmean(samples)
        spread = statistics.stdev(samples) if len(samples) > 1 else 0.0
        ci95 = 1.96 * spread / math.sqrt(len(samples))
        return mean * 1000.0, ci95 * 1000.0

    ours_mean, ours_ci = _stats(ours_times)
    sota_mean, sota_ci = _stats(sota_times)
    ratio = sota_mean / ours_mean
    return BenchmarkResult(
        suite=suite_id,
        iterations=iterations,
        ours_verifications_per_frame=1,
        sota_verifications_per_frame=3,
        ours_mean_ms=ours_mean,
        ours_ci95_ms=ours_ci,
        sota_mean_ms=sota_mean,
        sota_ci95_ms=sota_ci,
        time_ratio=ratio,
        energy_ratio=ratio,
    )
