"""Command line entry points: run, replay, demo, synth, lists, export."""

from __future__ import annotations

import json
import sys
import time

import click

from .app import build_app
from .capture import LiveSource, read_pcap_file
from .config import AppConfig, load_config
from .store import TelemetryStore
from .synth import DemoFeed, ScenarioSpec, StubResolver, generate, load_scenario

FIREBOG_TRACKING_LISTS = {
    "easyprivacy": "https://v.firebog.net/hosts/Easyprivacy.txt",
    "prigent-ads": "https://v.firebog.net/hosts/Prigent-Ads.txt",
    "fademind-2o7net": "https://raw.githubusercontent.com/FadeMind/hosts.extras/master/add.2o7Net/hosts",
    "windowsspyblocker": "https://raw.githubusercontent.com/crazy-max/WindowsSpyBlocker/master/data/hosts/spy.txt",
    "frogeye-firstparty": "https://hostfiles.frogeye.fr/firstparty-trackers-hosts.txt",
    "ads-and-tracking-extended": "https://www.github.developerdan.com/hosts/lists/ads-and-tracking-extended.txt",
    "android-tracking": "https://raw.githubusercontent.com/Perflyst/PiHoleBlocklist/master/android-tracking.txt",
    "smarttv": "https://raw.githubusercontent.com/Perflyst/PiHoleBlocklist/master/SmartTV.txt",
    "amazonfiretv": "https://raw.githubusercontent.com/Perflyst/PiHoleBlocklist/master/AmazonFireTV.txt",
    "notrack-blocklist": "https://gitlab.com/quidsup/notrack-blocklists/raw/master/notrack-blocklist.txt",
}


def _load_app_config(config_path: str | None) -> AppConfig:
    return load_config(config_path) if config_path else AppConfig()


@click.group()
def main() -> None:
    """Per-device IoT traffic visibility with selective tracker blocking."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
def run(config_path: str) -> None:
    """Live capture on the configured interface, with sinkhole and API."""
    import threading

    config = load_config(config_path)
    if not config.interface:
        raise click.ClickException("config is missing [capture].interface")
    app = build_app(config, with_sinkhole=True)
    assert app.sinkhole is not None
    app.sinkhole.start()
    app.start_api()
    click.echo(f"api on http://{config.api_host}:{config.api_port}, dns on {config.dns_host}:{config.dns_port}")

    def maintenance() -> None:
        # raw events age out after the retention window; map entries by TTL
        while True:
            now_us = time.time_ns() // 1000
            app.store.prune_events(now_us - config.retention_days * 86_400 * 1_000_000)
            app.engine.ip_map.evict_expired(now_us)
            time.sleep(3600)

    threading.Thread(target=maintenance, name="maintenance", daemon=True).start()
    source = LiveSource(config.interface)
    try:
        for ts_sec, ts_nsec, frame in source:
            app.service.ingest_frame(ts_sec, ts_nsec, frame)
    except KeyboardInterrupt:
        pass
    finally:
        source.close()
        app.stop()


@main.command()
@click.argument("pcap", type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--scenario", "scenario_path", type=click.Path(exists=True), default=None,
              help="Scenario JSON; registers its devices and fixture lists.")
@click.option("--speed", type=float, default=0.0, help="Pace packets at N x real time (0 = instant).")
@click.option("--export", "export_path", type=click.Path(), default=None)
def replay(pcap: str, config_path: str | None, scenario_path: str | None, speed: float, export_path: str | None) -> None:
    """Replay a pcap file through the full pipeline and print a summary."""
    config = _load_app_config(config_path)
    scenario = load_scenario(scenario_path) if scenario_path else None
    fixture = None
    if scenario is not None:
        _, manifest = generate(scenario)
        fixture = manifest["fixture"]
    app = build_app(config, scenario=scenario, fixture=fixture)
    frames = read_pcap_file(pcap)
    if speed > 0:
        previous = None
        with app.store.bulk():
            for ts_sec, ts_nsec, frame in frames:
                ts_us = ts_sec * 1_000_000 + ts_nsec // 1000
                if previous is not None and ts_us > previous:
                    time.sleep((ts_us - previous) / 1_000_000 / speed)
                previous = ts_us
                app.service.ingest_frame(ts_sec, ts_nsec, frame)
        counters = app.engine.counters
        summary = {
            "packets": counters.packets,
            "events": counters.events,
            "drops": dict(sorted(counters.drops.items())),
        }
    else:
        summary = app.service.replay(frames)
    click.echo(json.dumps(summary, indent=2, sort_keys=True))
    if export_path:
        with open(export_path, "w", encoding="utf-8") as fh:
            fh.write(app.store.export_json())
        click.echo(f"store exported to {export_path}")
    app.stop()


@main.command()
@click.option("--scenario", "scenario_path", type=click.Path(exists=True), default=None)
@click.option("--speed", type=float, default=20.0, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--dns-port", type=int, default=5353, show_default=True)
@click.option("--once", is_flag=True, help="Feed the scenario once, then keep serving the final state.")
def demo(scenario_path: str | None, speed: float, host: str, port: int, dns_port: int, once: bool) -> None:
    """Self-contained demo: synthetic traffic, sinkhole, API, event stream."""
    from importlib import resources

    if scenario_path:
        spec = load_scenario(scenario_path)
    else:
        text = resources.files("gatewatch.data").joinpath("demo_scenario.json").read_text("utf-8")
        spec = ScenarioSpec.from_dict(json.loads(text))
    _, manifest = generate(spec)
    config = AppConfig(api_host=host, api_port=port, dns_host=host, dns_port=dns_port, blocklist_path="")
    stub = StubResolver(manifest["domain_ips"])
    stub.start()
    from .sinkhole import UpstreamClient

    app = build_app(
        config,
        scenario=spec,
        fixture=manifest["fixture"],
        with_sinkhole=True,
        upstream=UpstreamClient(stub.address),
    )
    assert app.sinkhole is not None
    now_us = lambda: time.time_ns() // 1000  # noqa: E731
    app.sinkhole.on_decision = lambda decision, client_ip: app.record_blocked_query(
        decision, client_ip, now_us()
    )
    app.sinkhole.start()
    app.start_api()
    click.echo(f"demo api on http://{host}:{port}, dns sinkhole on {host}:{dns_port} (speed {speed}x)")
    try:
        while True:
            feed = DemoFeed(spec, app.service.frame_sink(), speed=speed)
            feed.run()
            if once:
                click.echo("scenario finished; serving final state (Ctrl-C to exit)")
                while True:
                    time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        stub.stop()
        app.stop()


@main.command()
@click.argument("scenario_path", type=click.Path(exists=True))
@click.option("-o", "--output", type=click.Path(), required=True)
@click.option("--manifest", "manifest_path", type=click.Path(), default=None)
def synth(scenario_path: str, output: str, manifest_path: str | None) -> None:
    """Generate a pcap fixture (and manifest) from a scenario JSON file."""
    spec = load_scenario(scenario_path)
    pcap, manifest = generate(spec)
    with open(output, "wb") as fh:
        fh.write(pcap)
    click.echo(f"wrote {manifest['packet_count']} packets to {output}")
    if manifest_path:
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        click.echo(f"manifest written to {manifest_path}")


@main.group()
def lists() -> None:
    """Filter list management."""


@lists.command()
@click.option("--dest", type=click.Path(), required=True, help="Directory for refreshed lists.")
@click.option("--timeout", type=float, default=30.0, show_default=True)
def refresh(dest: str, timeout: float) -> None:
    """Fetch the tracking filter lists from their upstream locations."""
    import os
    import urllib.request

    os.makedirs(dest, exist_ok=True)
    failures = 0
    for name, url in FIREBOG_TRACKING_LISTS.items():
        target = os.path.join(dest, f"{name}.txt")
        try:
            with urllib.request.urlopen(url, timeout=timeout) as response:
                body = response.read()
            with open(target, "wb") as fh:
                fh.write(body)
            click.echo(f"{name}: {len(body)} bytes")
        except OSError as exc:
            failures += 1
            click.echo(f"{name}: FAILED ({exc})", err=True)
    if failures:
        raise click.ClickException(f"{failures} list(s) failed to refresh")


@main.command()
@click.option("--store", "store_path", type=click.Path(exists=True), required=True)
@click.option("-o", "--output", type=click.Path(), default=None)
def export(store_path: str, output: str | None) -> None:
    """Dump the telemetry store as canonical JSON."""
    store = TelemetryStore(store_path)
    payload = store.export_json()
    store.close()
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)


if __name__ == "__main__":
    main()
