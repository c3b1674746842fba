"""Scenario generator: determinism, manifest math, demo feed equivalence."""

from __future__ import annotations

import json
import time

import pytest

from gatewatch.app import build_app
from gatewatch.capture import read_pcap
from gatewatch.config import AppConfig
from gatewatch.synth import (
    DemoFeed,
    DeviceSpec,
    DomainSpec,
    InvalidSpec,
    ScenarioSpec,
    generate,
)

from .conftest import small_scenario

DEV = DeviceSpec("dev-1", "aa:00:00:00:00:01", "10.1.0.2")


def test_zero_duration_gives_empty_pcap_and_manifest():
    spec = ScenarioSpec(seed=1, devices=(DEV,), domains=(DomainSpec("x.demo.com", False, 60),), duration_s=0)
    pcap, manifest = generate(spec)
    assert list(read_pcap(pcap)) == []
    assert manifest["packet_count"] == 0
    assert manifest["expected"]["domain_stats"] == []


def test_rate_times_duration_sets_event_count():
    spec = ScenarioSpec(seed=2, devices=(DEV,), domains=(DomainSpec("x.demo.com", False, 60),), duration_s=60)
    _, manifest = generate(spec)
    assert manifest["domains"]["x.demo.com"]["events"] == 60


def test_same_seed_same_bytes():
    spec = small_scenario()
    assert generate(spec)[0] == generate(spec)[0]
    different = generate(small_scenario(seed=8))[0]
    assert different != generate(spec)[0]


def test_manifest_is_json_serializable_and_stable():
    _, manifest = generate(small_scenario())
    a = json.dumps(manifest, sort_keys=True)
    _, manifest2 = generate(small_scenario())
    b = json.dumps(manifest2, sort_keys=True)
    assert a == b


@pytest.mark.parametrize(
    "spec_kwargs, message",
    [
        (dict(domains=(DomainSpec("x.demo.com", False, 0),)), "rate"),
        (dict(domains=(DomainSpec("bad..name.com", False, 5),)), "invalid domain"),
        (dict(domains=(DomainSpec("x.demo.xyz", False, 5),)), "must end in"),
        (dict(devices=()), "at least one device"),
        (
            dict(devices=(DEV, DEV)),
            "duplicate device",
        ),
        (
            dict(
                domains=(
                    DomainSpec("t.demo.com", True, 5),
                    DomainSpec("sub.t.demo.com", False, 5),
                )
            ),
            "subdomain of a tracker",
        ),
    ],
)
def test_invalid_specs_rejected(spec_kwargs, message):
    base = dict(seed=1, devices=(DEV,), domains=(DomainSpec("x.demo.com", False, 5),), duration_s=30)
    base.update(spec_kwargs)
    with pytest.raises(InvalidSpec, match=message):
        generate(ScenarioSpec(**base))


def test_fixture_filter_list_contains_exactly_trackers():
    _, manifest = generate(small_scenario())
    listed = {
        line.split()[1]
        for line in manifest["fixture"]["filter_list"].splitlines()
        if line.strip()
    }
    flagged = {d for d, info in manifest["domains"].items() if info["is_tracker"]}
    assert listed == flagged


def test_scenario_json_roundtrip(tmp_path):
    spec = small_scenario()
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(spec.to_dict()))
    from gatewatch.synth import load_scenario

    assert load_scenario(str(path)) == spec


def _run_demo(spec, speed: float):
    _, manifest = generate(spec)
    app = build_app(AppConfig(blocklist_path=""), scenario=spec, fixture=manifest["fixture"])
    feed = DemoFeed(spec, app.service.frame_sink(), speed=speed)
    started = time.monotonic()
    feed.run()
    elapsed = time.monotonic() - started
    export = app.store.export_json()
    app.stop()
    return export, elapsed


def test_demo_feed_equals_offline_replay():
    spec = ScenarioSpec(
        seed=5,
        devices=(DEV,),
        domains=(DomainSpec("x.demo.com", True, 120), DomainSpec("y.demo.net", False, 120)),
        duration_s=4,
    )
    pcap, manifest = generate(spec)
    offline = build_app(AppConfig(blocklist_path=""), scenario=spec, fixture=manifest["fixture"])
    offline.service.replay(read_pcap(pcap))
    offline_export = offline.store.export_json()
    offline.stop()

    demo_export, _ = _run_demo(spec, speed=50)
    assert demo_export == offline_export


def test_double_speed_halves_wall_time_same_store():
    spec = ScenarioSpec(
        seed=6,
        devices=(DEV,),
        domains=(DomainSpec("x.demo.com", True, 300),),
        duration_s=4,
    )
    export_1x, elapsed_1x = _run_demo(spec, speed=2)
    export_2x, elapsed_2x = _run_demo(spec, speed=4)
    assert export_1x == export_2x
    assert elapsed_2x < elapsed_1x * 0.75


def test_paused_feed_emits_nothing():
    spec = ScenarioSpec(
        seed=7,
        devices=(DEV,),
        domains=(DomainSpec("x.demo.com", True, 600),),
        duration_s=5,
    )
    received = []
    feed = DemoFeed(spec, lambda s, ns, f: received.append(f), speed=10)
    feed.pause()
    feed.start()
    time.sleep(0.4)
    assert received == []
    feed.stop()


def test_invalid_speed_rejected():
    with pytest.raises(ValueError):
        DemoFeed(small_scenario(), lambda s, ns, f: None, speed=0)
