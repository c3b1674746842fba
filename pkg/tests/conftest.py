import json
from importlib import resources

import pytest

from gatewatch.app import build_app
from gatewatch.capture import read_pcap
from gatewatch.config import AppConfig
from gatewatch.synth import DeviceSpec, DomainSpec, ScenarioSpec, generate


def small_scenario(seed: int = 7) -> ScenarioSpec:
    """Compact deterministic scenario used by API fixtures and goldens."""
    return ScenarioSpec(
        seed=seed,
        devices=(
            DeviceSpec("plug-1", "aa:00:00:00:00:01", "10.9.0.11", "Smart Plug"),
            DeviceSpec("cam-1", "aa:00:00:00:00:02", "10.9.0.12", "Indoor Camera"),
            DeviceSpec("hub-1", "aa:00:00:00:00:03", "10.9.0.13", "Home Hub"),
        ),
        domains=(
            DomainSpec("telemetry.plugcloud.com", True, 20),
            DomainSpec("api.plugcloud.com", False, 24),
            DomainSpec("beacon.camspy.net", True, 16),
            DomainSpec("stream.camvault.io", False, 30),
            DomainSpec("ads.hubmarket.org", True, 10),
            DomainSpec("time.hubsync.net", False, 8),
            DomainSpec("pixel.lightprobe.io", True, 6),
            DomainSpec("cdn.fastpane.com", False, 12),
        ),
        duration_s=60,
    )


@pytest.fixture(scope="session")
def fixture_scenario() -> ScenarioSpec:
    return small_scenario()


@pytest.fixture(scope="session")
def fixture_generated(fixture_scenario):
    return generate(fixture_scenario)


@pytest.fixture()
def replayed_app(fixture_scenario, fixture_generated):
    pcap, manifest = fixture_generated
    app = build_app(
        AppConfig(blocklist_path=""), scenario=fixture_scenario, fixture=manifest["fixture"]
    )
    app.service.replay(read_pcap(pcap))
    yield app
    app.stop()


@pytest.fixture(scope="session")
def api_schema() -> dict:
    text = resources.files("gatewatch.data").joinpath("api.schema.json").read_text("utf-8")
    return json.loads(text)
