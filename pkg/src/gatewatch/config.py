"""TOML configuration for the gateway service."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class DeviceConfig:
    device_key: str
    display_name: str = ""
    mac: str = ""
    ips: tuple[str, ...] = ()


@dataclass
class AppConfig:
    # capture
    interface: str = ""
    monitor_unregistered: bool = True
    # dns sinkhole
    dns_host: str = "127.0.0.1"
    dns_port: int = 5353
    upstream: str = "1.1.1.1:53"
    null_blocking: bool = True
    subdomain_matching: bool = True
    blocklist_path: str = "blocklist.txt"
    # api
    api_host: str = "127.0.0.1"
    api_port: int = 8080
    # store
    store_path: str = ":memory:"
    bucket_width_s: int = 5
    retention_days: int = 7
    # filter lists
    lists_dir: str = ""  # empty: vendored snapshot
    list_names: tuple[str, ...] = ()
    devices: tuple[DeviceConfig, ...] = field(default_factory=tuple)

    @property
    def upstream_address(self) -> tuple[str, int]:
        host, _, port = self.upstream.rpartition(":")
        return host or self.upstream, int(port) if port else 53


def load_config(path: str) -> AppConfig:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    capture = raw.get("capture", {})
    dns = raw.get("dns", {})
    api = raw.get("api", {})
    store = raw.get("store", {})
    lists = raw.get("lists", {})
    devices = tuple(
        DeviceConfig(
            device_key=d["device_key"],
            display_name=d.get("display_name", ""),
            mac=d.get("mac", ""),
            ips=tuple(d.get("ips", ())),
        )
        for d in raw.get("devices", ())
    )
    return AppConfig(
        interface=capture.get("interface", ""),
        monitor_unregistered=capture.get("monitor_unregistered", True),
        dns_host=dns.get("host", "127.0.0.1"),
        dns_port=int(dns.get("port", 5353)),
        upstream=dns.get("upstream", "1.1.1.1:53"),
        null_blocking=dns.get("null_blocking", True),
        subdomain_matching=dns.get("subdomain_matching", True),
        blocklist_path=dns.get("blocklist_path", "blocklist.txt"),
        api_host=api.get("host", "127.0.0.1"),
        api_port=int(api.get("port", 8080)),
        store_path=store.get("path", ":memory:"),
        bucket_width_s=int(store.get("bucket_width_s", 5)),
        retention_days=int(store.get("retention_days", 7)),
        lists_dir=lists.get("dir", ""),
        list_names=tuple(lists.get("names", ())),
        devices=devices,
    )
