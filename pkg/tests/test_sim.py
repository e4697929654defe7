import random

import pytest

from bscert import cli, crypto, ledger, mfa, sim
from bscert.sim import (
    DEFAULT_CHANNELS,
    AttackerMode,
    ConfigError,
    SyncError,
    UserEquipment,
    offline_sync,
    rrc_phase_model,
)

from conftest import BS_LOCATION, NOW, build_ledger


def _base_config(**overrides):
    doc = {
        "seed": 5,
        "iterations": 20,
        "base_stations": [
            {"cell_id": 0x1A2B3C, "latitude": 38.8339, "longitude": -104.8214}
        ],
        "ues": [
            {"latitude": 38.8348, "longitude": -104.8214, "tau_d": 2000.0,
             "tau_t": 0.5, "scheme": "ours"}
        ],
    }
    doc.update(overrides)
    return doc


# -- offline delivery ----------------------------------------------------------

def test_default_channel_latencies():
    assert DEFAULT_CHANNELS["adhoc_wifi"].latency_s == 0.03222
    assert DEFAULT_CHANNELS["adhoc_bluetooth"].latency_s == 1.0702
    assert DEFAULT_CHANNELS["cloud_iowa"].latency_s == 0.05223
    assert DEFAULT_CHANNELS["cloud_singapore"].latency_s == 1.06005


def _make_ue(core_keypair):
    cfg = sim.UeConfig(name="ue", location=(38.8348, -104.8214))
    return UserEquipment(cfg, core_keypair.public, mfa.HAVERSINE)


def test_offline_sync_latency_and_adoption(core_keypair, small_ledger):
    chain, _ = small_ledger
    ue = _make_ue(core_keypair)
    copy, latency = offline_sync(ue, "third_party", DEFAULT_CHANNELS["adhoc_wifi"], chain)
    assert latency == pytest.approx(0.03222)
    assert copy is chain and ue.ledger is chain
    _, bt = offline_sync(ue, "third_party", DEFAULT_CHANNELS["adhoc_bluetooth"], chain)
    assert bt == pytest.approx(1.0702)


def test_offline_sync_rejects_tampered_ledger(core_keypair, validity, small_ledger):
    import dataclasses

    good, _ = small_ledger
    ue = _make_ue(core_keypair)
    offline_sync(ue, "third_party", DEFAULT_CHANNELS["adhoc_wifi"], good)

    target = good.blocks[1]
    moved = dataclasses.replace(
        target.payload.body, subject_cell_id=target.payload.body.subject_cell_id ^ 1
    )
    tampered_block = dataclasses.replace(
        target,
        payload=type(target.payload)(moved, target.payload.issuer_signature),
    )
    hostile = ledger.Ledger(
        blocks=good.blocks[:1] + (tampered_block,) + good.blocks[2:],
        index=good.index,
    )
    with pytest.raises(SyncError):
        offline_sync(ue, "third_party", DEFAULT_CHANNELS["adhoc_wifi"], hostile)
    assert ue.ledger is good  # keeps the previous verified copy


def test_offline_sync_rejects_wrongly_anchored_ledger(core_keypair, validity):
    rogue_core = crypto.generate_keypair("ecdsa-224", seed=31337)
    rogue_chain, _ = build_ledger(rogue_core, validity, [(0x77, BS_LOCATION)])
    ue = _make_ue(core_keypair)
    with pytest.raises(SyncError):
        offline_sync(ue, "third_party", DEFAULT_CHANNELS["adhoc_wifi"], rogue_chain)
    assert ue.ledger is None


def test_rrc_phase_model_values():
    assert rrc_phase_model("good") == 251.58
    assert rrc_phase_model("medium") == 300.90
    assert rrc_phase_model("poor") == 304.11
    with pytest.raises(ValueError):
        rrc_phase_model("excellent")


# -- configuration validation ---------------------------------------------------

def test_config_error_paths():
    with pytest.raises(ConfigError, match=r"config\.ues"):
        sim.scenario_from_dict({"base_stations": []})
    with pytest.raises(ConfigError, match=r"config\.ues\[0\]\.latitude"):
        sim.scenario_from_dict({"ues": [{"longitude": 0.0}]})
    with pytest.raises(ConfigError, match=r"config\.ues\[0\]\.scheme"):
        sim.scenario_from_dict(_base_config(
            ues=[{"latitude": 0.0, "longitude": 0.0, "scheme": "theirs"}]
        ))
    with pytest.raises(ConfigError, match=r"attackers\[0\]\.mode"):
        sim.scenario_from_dict(_base_config(attackers=[{"mode": "alien"}]))
    with pytest.raises(ConfigError, match="fabricated_cell_id"):
        sim.scenario_from_dict(_base_config(attackers=[{"mode": "new_bs"}]))
    with pytest.raises(ConfigError, match="must differ"):
        sim.scenario_from_dict(_base_config(attackers=[{
            "mode": "wormhole",
            "capture_latitude": 38.8339, "capture_longitude": -104.8214,
            "latitude": 38.8339, "longitude": -104.8214,
        }]))
    with pytest.raises(ConfigError, match="expectations"):
        sim.scenario_from_dict(_base_config(expectations={"acceptance": 1.0}))
    with pytest.raises(ConfigError, match=r"config\.suite"):
        sim.scenario_from_dict(_base_config(suite="ecdsa-571"))


def test_unseeded_defaults_fill_in():
    config = sim.scenario_from_dict(_base_config())
    assert config.suite is crypto.SuiteId.ECDSA_224
    assert config.channel.name == "adhoc_wifi"
    assert config.ues[0].name == "ue-0"


# -- scenario runs ---------------------------------------------------------------

def test_baseline_scenario_full_acceptance():
    report = sim.run_scenario(sim.scenario_from_dict(_base_config()))
    assert report.summary["legit"]["acceptance_rate"] == 1.0
    assert report.verification["ours_checks_per_accepted"] == 1.0
    assert report.offline["latency_s"]["ue-0"] == pytest.approx(0.03222)


def test_report_is_byte_identical_for_same_seed():
    doc = _base_config(attackers=[{
        "mode": "replay", "target_cell_id": 0x1A2B3C, "replay_delay_s": 2.0,
    }])
    a = sim.run_scenario(sim.scenario_from_dict(doc)).to_json()
    b = sim.run_scenario(sim.scenario_from_dict(doc)).to_json()
    assert a == b


def test_different_seed_changes_report():
    a = sim.run_scenario(sim.scenario_from_dict(_base_config(seed=1))).to_json()
    b = sim.run_scenario(sim.scenario_from_dict(_base_config(seed=2))).to_json()
    assert a != b


def test_wormhole_quick_run():
    doc = {
        "seed": 3,
        "iterations": 50,
        "reception_range_m": 5000.0,
        "base_stations": [
            {"cell_id": 0x1A2B3C, "latitude": 38.8339, "longitude": -104.8214}
        ],
        "ues": [
            {"name": "ue-ours", "latitude": 38.9238, "longitude": -104.8214,
             "scheme": "ours"},
            {"name": "ue-sota", "latitude": 38.9238, "longitude": -104.8214,
             "scheme": "sota"},
        ],
        "attackers": [{
            "mode": "wormhole", "target_cell_id": 0x1A2B3C,
            "capture_latitude": 38.8340, "capture_longitude": -104.8214,
            "latitude": 38.9238, "longitude": -104.8214,
        }],
    }
    report = sim.run_scenario(sim.scenario_from_dict(doc))
    assert report.summary["attack_ours"]["acceptance_rate"] == 0.0
    assert report.summary["attack_ours"]["failed_factors"] == {"location_fail": 50}
    assert report.summary["attack_sota"]["acceptance_rate"] == 1.0
    assert report.verification["sota_checks_per_accepted"] == 3.0
    # nobody hears the distant legitimate station directly
    assert report.summary["legit"]["received"] == 0


def test_attacker_wins_signal_race_but_not_attachment():
    doc = _base_config(attackers=[{
        "mode": "spoof_resign", "target_cell_id": 0x1A2B3C, "tx_power_dbm": 46.0,
    }])
    report = sim.run_scenario(sim.scenario_from_dict(doc))
    for entry in report.attachments:
        assert entry["strongest"].startswith("attacker:")
        assert entry["attached"] == "bs:0x1a2b3c"


def test_sensing_noise_within_half_tau_never_fails_location():
    # UE inside tau_d/2 of the station, bounded noise under tau_d/2: the
    # triangle inequality keeps the location factor green.
    doc = _base_config(
        iterations=500,
        ues=[{
            "latitude": 38.8348, "longitude": -104.8214,  # ~100 m out
            "tau_d": 400.0, "tau_t": 0.5, "scheme": "ours",
            "sensing_noise_m": 195.0,
        }],
    )
    report = sim.run_scenario(sim.scenario_from_dict(doc))
    assert report.summary["legit"]["acceptance_rate"] == 1.0


def test_modeled_costs_and_fraction():
    report = sim.run_scenario(sim.scenario_from_dict(_base_config()))
    modeled = report.modeled
    assert modeled["time_ratio"] == 3.0
    assert modeled["energy_ratio"] == modeled["time_ratio"]
    assert modeled["rrc_phase_ms"] == 251.58
    assert modeled["verification_fraction_of_rrc"] == pytest.approx(0.0189, abs=2e-4)


def test_expectation_failure_flips_ok():
    doc = _base_config(expectations={"legit_acceptance": 0.5})
    report = sim.run_scenario(sim.scenario_from_dict(doc))
    assert not report.ok


def test_strict_nonce_ue_rejects_in_threshold_replay():
    doc = _base_config(
        ues=[{"latitude": 38.8348, "longitude": -104.8214, "tau_d": 2000.0,
              "tau_t": 0.5, "scheme": "ours", "strict_nonce": True}],
        attackers=[{"mode": "replay", "target_cell_id": 0x1A2B3C,
                    "replay_delay_s": 0.3}],
    )
    report = sim.run_scenario(sim.scenario_from_dict(doc))
    assert report.summary["legit"]["acceptance_rate"] == 1.0
    assert report.summary["attack_ours"]["acceptance_rate"] == 0.0
    assert set(report.summary["attack_ours"]["failed_factors"]) == {"time_fail"}


def test_oversized_base_size_rejected():
    with pytest.raises(ConfigError, match="transport cap"):
        sim.scenario_from_dict(_base_config(base_size=370))


def test_per_station_suite_override():
    doc = _base_config(base_stations=[
        {"cell_id": 0x1A2B3C, "latitude": 38.8339, "longitude": -104.8214,
         "suite": "ecdsa-521"},
    ])
    report = sim.run_scenario(sim.scenario_from_dict(doc))
    assert report.summary["legit"]["acceptance_rate"] == 1.0
    with pytest.raises(ConfigError, match=r"base_stations\[0\]\.suite"):
        sim.scenario_from_dict(_base_config(base_stations=[
            {"cell_id": 1, "latitude": 0.0, "longitude": 0.0, "suite": "ecdsa-571"},
        ]))


def test_inline_channel_profile_with_jitter():
    doc = _base_config(channel={
        "name": "lab-link", "kind": "cloud_tcp", "latency_s": 0.2, "jitter_s": 0.05,
    })
    config = sim.scenario_from_dict(doc)
    assert config.channel.name == "lab-link"
    report = sim.run_scenario(config)
    latency = report.offline["latency_s"]["ue-0"]
    assert latency != 0.2 and abs(latency - 0.2) < 0.5  # jitter applied
    # same seed reproduces the jittered draw
    again = sim.run_scenario(sim.scenario_from_dict(doc))
    assert again.offline["latency_s"]["ue-0"] == latency
    with pytest.raises(ConfigError, match=r"config\.channel\.latency_s"):
        sim.scenario_from_dict(_base_config(channel={"kind": "cloud_tcp"}))


# -- benchmark -------------------------------------------------------------------

def test_benchmark_counts_and_validation():
    with pytest.raises(ValueError):
        sim.benchmark_verification("ecdsa-224", 99)
    result = sim.benchmark_verification("ecdsa-224", 150)
    assert result.ours_verifications_per_frame == 1
    assert result.sota_verifications_per_frame == 3
    assert result.ours_mean_ms > 0 and result.sota_mean_ms > 0
    assert result.energy_ratio == result.time_ratio


def test_bundled_scenarios_parse():
    names = cli.bundled_scenarios()
    assert {"baseline", "new_bs", "spoof_resign", "spoof_forge",
            "replay", "replay_within_threshold", "wormhole"} <= set(names)
    for name in names:
        config = cli.load_scenario(name)
        assert config.iterations > 0
