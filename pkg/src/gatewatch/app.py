"""Wires capture, filters, store, sinkhole, and API into one running app."""

from __future__ import annotations

import threading
from dataclasses import dataclass

import uvicorn

from .api import ApiContext, create_app
from .config import AppConfig
from .engine import DeviceRegistry, DnsAnswerEvent, KnownDevice, PacketEngine
from .filters import (
    DomainLabeler,
    OrgTable,
    compile_lists,
    load_bundled_org_table,
    load_vendored_lists,
)
from .psl import load_bundled_table
from .service import EventBus, IngestService
from .sinkhole import Action, BlockList, SinkholeDecision, SinkholeServer, UpstreamClient
from .store import TelemetryStore
from .synth import FIXTURE_LIST_NAME, ScenarioSpec


def build_labeler(
    config: AppConfig, *, fixture: dict | None = None, subdomain_matching: bool | None = None
) -> DomainLabeler:
    """Labeler from the configured lists, or from a scenario fixture."""
    matching = config.subdomain_matching if subdomain_matching is None else subdomain_matching
    if fixture is not None:
        ruleset = compile_lists(
            [(fixture.get("filter_list_name", FIXTURE_LIST_NAME), fixture["filter_list"])],
            subdomain_matching=matching,
        )
        orgs = OrgTable.parse(fixture.get("org_table", ""))
    else:
        if config.lists_dir:
            import os

            lists = []
            for name in sorted(os.listdir(config.lists_dir)):
                if name.endswith(".txt"):
                    with open(os.path.join(config.lists_dir, name), "r", encoding="utf-8") as fh:
                        lists.append((name[:-4], fh.read()))
        else:
            lists = load_vendored_lists(config.list_names or None)
        ruleset = compile_lists(lists, subdomain_matching=matching)
        orgs = load_bundled_org_table()
    return DomainLabeler(ruleset=ruleset, psl_table=load_bundled_table(), orgs=orgs)


def registry_from_config(config: AppConfig) -> DeviceRegistry:
    devices = [
        KnownDevice(d.device_key, d.display_name, d.mac.lower() or None, tuple(d.ips))
        for d in config.devices
    ]
    return DeviceRegistry(devices, monitor_unregistered=config.monitor_unregistered)


def registry_from_scenario(spec: ScenarioSpec) -> DeviceRegistry:
    devices = [
        KnownDevice(d.device_key, d.display_name or d.device_key, d.mac.lower(), (d.ip,))
        for d in spec.devices
    ]
    return DeviceRegistry(devices, monitor_unregistered=True)


@dataclass
class GatewayApp:
    config: AppConfig
    store: TelemetryStore
    labeler: DomainLabeler
    engine: PacketEngine
    service: IngestService
    blocklist: BlockList
    bus: EventBus
    sinkhole: SinkholeServer | None = None
    _api_server: uvicorn.Server | None = None
    _api_thread: threading.Thread | None = None

    def fastapi_app(self):
        return create_app(
            ApiContext(
                store=self.store,
                blocklist=self.blocklist,
                labeler=self.labeler,
                bus=self.bus,
                engine=self.engine,
            )
        )

    def start_api(
        self, host: str | None = None, port: int | None = None, *, wait_s: float = 10.0
    ) -> tuple[str, int]:
        """Serve the API in a background thread; returns the bound address."""
        import time

        uv_config = uvicorn.Config(
            self.fastapi_app(),
            host=host or self.config.api_host,
            port=port if port is not None else self.config.api_port,
            log_level="warning",
        )
        self._api_server = uvicorn.Server(uv_config)
        self._api_thread = threading.Thread(
            target=self._api_server.run, name="api-server", daemon=True
        )
        self._api_thread.start()
        deadline = time.monotonic() + wait_s
        while not self._api_server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("API server failed to start")
            time.sleep(0.01)
        sock = self._api_server.servers[0].sockets[0]
        return sock.getsockname()[:2]

    def record_blocked_query(self, decision: SinkholeDecision, client_ip: str, ts_us: int) -> None:
        """Count a sinkhole-blocked query as a contacted-and-blocked domain.

        Used in demo mode where no capture observes the sinkhole's own
        responses; under live capture the synthesized answer is captured
        like any other DNS response and counting it here would double up.
        """
        if decision.action is not Action.BLOCKED:
            return
        device_key = self.engine.registry.resolve_ip(client_ip) or client_ip
        event = DnsAnswerEvent(
            ts_us=ts_us, device_key=device_key, qname=decision.qname, answers=(), ancount=0
        )
        self.store.touch_device(device_key, ts_us, address=client_ip)
        row = self.store.record_dns(event, self.labeler)
        self.bus.publish(
            "domain_contacted",
            {
                "device_key": device_key,
                "fqdn": decision.qname,
                "label": row["label"],
                "access_count": row["access_count"],
                "last_contacted_us": row["last_contacted_us"],
                "blocked": bool(row["blocked"]),
            },
        )

    def stop(self) -> None:
        if self.sinkhole is not None:
            self.sinkhole.stop()
        if self._api_server is not None:
            self._api_server.should_exit = True
        if self._api_thread is not None:
            self._api_thread.join(timeout=5)
        self.store.close()


def build_app(
    config: AppConfig,
    *,
    scenario: ScenarioSpec | None = None,
    fixture: dict | None = None,
    with_sinkhole: bool = False,
    upstream: UpstreamClient | None = None,
) -> GatewayApp:
    registry = registry_from_scenario(scenario) if scenario else registry_from_config(config)
    labeler = build_labeler(config, fixture=fixture)
    store = TelemetryStore(config.store_path, bucket_width_s=config.bucket_width_s)
    blocklist = BlockList(config.blocklist_path or None, subdomain_matching=config.subdomain_matching)
    store.set_blocked_matcher(lambda fqdn: blocklist.matches(fqdn) is not None)
    engine = PacketEngine(registry)
    bus = EventBus()
    service = IngestService(engine, store, labeler, bus)
    app = GatewayApp(
        config=config,
        store=store,
        labeler=labeler,
        engine=engine,
        service=service,
        blocklist=blocklist,
        bus=bus,
    )
    if with_sinkhole:
        client = upstream if upstream is not None else UpstreamClient(config.upstream_address)
        app.sinkhole = SinkholeServer(
            blocklist,
            client,
            host=config.dns_host,
            port=config.dns_port,
            null_blocking=config.null_blocking,
        )
    return app
