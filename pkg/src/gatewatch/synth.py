"""Deterministic synthetic device traffic: pcap fixtures plus exact oracles.

A scenario (seed, devices, domains with contact rates, duration) fully
determines a pcap of DNS responses and TCP/UDP flows, together with a
manifest holding the exact per-domain counts, byte totals, bucket
series, and aggregate figures the pipeline must reproduce.  The
manifest is tallied while the packets are generated, so its numbers are
true by construction rather than recomputed through the code under
test.

A fixture filter list and organization table are part of the manifest
so the scenario's tracker flags line up with classification.
"""

from __future__ import annotations

import ipaddress
import json
import random
import threading
import time
from dataclasses import asdict, dataclass
from typing import Callable

from .capture import build_tcp_packet, build_udp_packet, write_pcap
from .dnswire import TYPE_A, TYPE_AAAA, TYPE_CNAME, encode_response
from .names import is_valid_fqdn, normalize_fqdn

GATEWAY_MAC = "02:00:00:00:00:01"
GATEWAY_IP = "10.0.0.1"
DEFAULT_BASE_TIME_US = 1_700_000_000_000_000
FIXTURE_LIST_NAME = "fixture-trackers"

# TLDs the manifest may assume are plain single-label public suffixes
_SIMPLE_TLDS = frozenset({"com", "net", "org", "io"})

_CACHED_FLOW_PROBABILITY = 0.6  # devices answering from their resolver cache
_UNRESOLVED_PROBABILITY = 0.03
_CNAME_PROBABILITY = 0.3
_UDP_FLOW_PROBABILITY = 0.2


class InvalidSpec(ValueError):
    pass


@dataclass(frozen=True)
class DeviceSpec:
    device_key: str
    mac: str
    ip: str
    display_name: str = ""


@dataclass(frozen=True)
class DomainSpec:
    fqdn: str
    is_tracker: bool
    rate_per_min: float


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int
    devices: tuple[DeviceSpec, ...]
    domains: tuple[DomainSpec, ...]
    duration_s: int
    base_time_us: int = DEFAULT_BASE_TIME_US
    bucket_width_s: int = 5

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        return cls(
            seed=int(data["seed"]),
            devices=tuple(DeviceSpec(**d) for d in data["devices"]),
            domains=tuple(DomainSpec(**d) for d in data["domains"]),
            duration_s=int(data["duration_s"]),
            base_time_us=int(data.get("base_time_us", DEFAULT_BASE_TIME_US)),
            bucket_width_s=int(data.get("bucket_width_s", 5)),
        )

    def to_dict(self) -> dict:
        return asdict(self)


def load_scenario(path: str) -> ScenarioSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return ScenarioSpec.from_dict(json.load(fh))


def _validate(spec: ScenarioSpec) -> None:
    if spec.duration_s < 0:
        raise InvalidSpec("duration must be >= 0")
    if spec.duration_s and not spec.devices:
        raise InvalidSpec("a scenario with traffic needs at least one device")
    keys = [d.device_key for d in spec.devices]
    if len(set(keys)) != len(keys):
        raise InvalidSpec("duplicate device keys")
    names = [normalize_fqdn(d.fqdn) for d in spec.domains]
    if len(set(names)) != len(names):
        raise InvalidSpec("duplicate domains")
    trackers = {normalize_fqdn(d.fqdn) for d in spec.domains if d.is_tracker}
    for domain in spec.domains:
        name = normalize_fqdn(domain.fqdn)
        if not is_valid_fqdn(name, min_labels=2):
            raise InvalidSpec(f"invalid domain {domain.fqdn!r}")
        if domain.rate_per_min <= 0:
            raise InvalidSpec(f"rate must be > 0 for {domain.fqdn}")
        if name.split(".")[-1] not in _SIMPLE_TLDS:
            raise InvalidSpec(f"{domain.fqdn!r}: fixture domains must end in one of {sorted(_SIMPLE_TLDS)}")
        if not domain.is_tracker:
            # a non-tracker under a tracker rule would classify wrong by suffix
            labels = name.split(".")
            for i in range(1, len(labels)):
                if ".".join(labels[i:]) in trackers:
                    raise InvalidSpec(f"{domain.fqdn!r} is a subdomain of a tracker fixture domain")


def _fixture_sld(fqdn: str) -> str:
    return ".".join(fqdn.split(".")[-2:])


def _org_map(spec: ScenarioSpec) -> dict[str, str]:
    """Organization per SLD; every third SLD is deliberately uncovered."""
    slds = sorted({_fixture_sld(normalize_fqdn(d.fqdn)) for d in spec.domains})
    orgs: dict[str, str] = {}
    for i, sld in enumerate(slds):
        if i % 3 == 2:
            continue
        brand = sld.split(".")[0]
        orgs[sld] = brand.capitalize() + " Inc"
    return orgs


def _domain_ip(index: int, v6: bool) -> str:
    if v6:
        return str(ipaddress.IPv6Address(int(ipaddress.IPv6Address("2001:db8::")) + index + 1))
    return str(ipaddress.IPv4Address(int(ipaddress.IPv4Address("198.18.0.0")) + index + 1))


def generate(spec: ScenarioSpec) -> tuple[bytes, dict]:
    """Produce (pcap bytes, manifest). Same spec, same bytes, every time."""
    _validate(spec)
    rng = random.Random(spec.seed)
    bucket_us = spec.bucket_width_s * 1_000_000

    # every sixth domain is reachable over IPv6 to exercise AAAA and v6 flows
    domain_v6 = {
        normalize_fqdn(d.fqdn): (i % 6 == 5) for i, d in enumerate(spec.domains)
    }
    domain_ip = {
        normalize_fqdn(d.fqdn): _domain_ip(i, domain_v6[normalize_fqdn(d.fqdn)])
        for i, d in enumerate(spec.domains)
    }
    org_map = _org_map(spec)

    # draw all contact instants first so packet order is purely time order
    contacts: list[tuple[int, str, DeviceSpec]] = []
    for domain in spec.domains:
        name = normalize_fqdn(domain.fqdn)
        count = round(domain.rate_per_min * spec.duration_s / 60)
        for _ in range(count):
            offset_us = rng.randrange(spec.duration_s * 1_000_000) if spec.duration_s else 0
            device = spec.devices[rng.randrange(len(spec.devices))] if spec.devices else None
            contacts.append((spec.base_time_us + offset_us, name, device))
    contacts.sort(key=lambda c: c[0])

    stats: dict[tuple[str, str], dict] = {}
    buckets: dict[tuple[str, int], int] = {}
    dns_series: dict[str, dict[int, int]] = {}
    device_first: dict[str, int] = {}
    device_last: dict[str, int] = {}
    device_addresses: dict[str, set[str]] = {}
    unresolved_bytes: dict[str, int] = {}
    packets: list[tuple[int, int, bytes]] = []
    dns_packets = 0
    flow_packets = 0
    seen_pair: set[tuple[str, str]] = set()

    def touch_device(key: str, ts: int, address: str) -> None:
        device_first.setdefault(key, ts)
        device_first[key] = min(device_first[key], ts)
        device_last[key] = max(device_last.get(key, ts), ts)
        device_addresses.setdefault(key, set()).add(address)

    def count_contact(key: str, fqdn: str, ts: int) -> None:
        stat = stats.setdefault(
            (key, fqdn),
            {"access_count": 0, "last_contacted_us": 0},
        )
        stat["access_count"] += 1
        stat["last_contacted_us"] = max(stat["last_contacted_us"], ts)

    def emit(ts: int, frame: bytes) -> None:
        packets.append((ts // 1_000_000, (ts % 1_000_000) * 1000, frame))

    for ts, fqdn, device in contacts:
        assert device is not None
        key = device.device_key
        v6 = domain_v6[fqdn]
        dst_ip = domain_ip[fqdn]
        cached = (key, fqdn) in seen_pair and rng.random() < _CACHED_FLOW_PROBABILITY
        seen_pair.add((key, fqdn))

        if not cached:
            # DNS response from the gateway resolver to the device
            txid = rng.randrange(65536)
            answers: list[tuple[str, int, int, str]] = []
            owner = fqdn
            if rng.random() < _CNAME_PROBABILITY:
                target = f"edge-{rng.randrange(1000)}.cdn-fixture.net"
                answers.append((owner, TYPE_CNAME, 300, target))
                owner = target
            rtype = TYPE_AAAA if v6 else TYPE_A
            answers.append((owner, rtype, 300, dst_ip))
            payload = encode_response(txid, fqdn, rtype, answers)
            frame = build_udp_packet(
                GATEWAY_MAC, GATEWAY_IP, 53, device.mac, device.ip, rng.randrange(1024, 65536), payload
            )
            emit(ts, frame)
            dns_packets += 1
            touch_device(key, ts, device.ip)
            count_contact(key, fqdn, ts)
            series = dns_series.setdefault(key, {})
            window = (ts // bucket_us) * bucket_us
            series[window] = series.get(window, 0) + 1

        # the flow itself, shortly after (same microsecond tick is fine)
        flow_ts = ts + rng.randrange(1000, 50_000)
        size = rng.randrange(64, 1400)
        sport = rng.randrange(1024, 65536)
        src_ip = _device_v6(device) if v6 else device.ip
        if rng.random() < _UDP_FLOW_PROBABILITY:
            frame = build_udp_packet(device.mac, src_ip, sport, GATEWAY_MAC, dst_ip, 123, bytes(size))
        else:
            frame = build_tcp_packet(device.mac, src_ip, sport, GATEWAY_MAC, dst_ip, 443, bytes(size))
        emit(flow_ts, frame)
        flow_packets += 1
        touch_device(key, flow_ts, src_ip)
        count_contact(key, fqdn, flow_ts)
        window = (flow_ts // bucket_us) * bucket_us
        buckets[(key, window)] = buckets.get((key, window), 0) + size

        if rng.random() < _UNRESOLVED_PROBABILITY:
            # background chatter to an address no DNS answer ever named
            extra_ts = ts + rng.randrange(50_000, 200_000)
            extra_size = rng.randrange(64, 600)
            frame = build_tcp_packet(
                device.mac, device.ip, rng.randrange(1024, 65536), GATEWAY_MAC, "203.0.113.250", 8443, bytes(extra_size)
            )
            emit(extra_ts, frame)
            flow_packets += 1
            touch_device(key, extra_ts, device.ip)
            window = (extra_ts // bucket_us) * bucket_us
            buckets[(key, window)] = buckets.get((key, window), 0) + extra_size
            unresolved_bytes[key] = unresolved_bytes.get(key, 0) + extra_size

    packets.sort(key=lambda p: (p[0], p[1]))
    pcap = write_pcap(packets)

    tracker_flags = {normalize_fqdn(d.fqdn): d.is_tracker for d in spec.domains}
    expected_stats = [
        {
            "device_key": key,
            "fqdn": fqdn,
            "sld": _fixture_sld(fqdn),
            "organization": org_map.get(_fixture_sld(fqdn), "Unknown"),
            "label": "tracker" if tracker_flags[fqdn] else "non_tracker",
            "access_count": stat["access_count"],
            "last_contacted_us": stat["last_contacted_us"],
            "blocked": False,
        }
        for (key, fqdn), stat in sorted(stats.items())
    ]
    expected_buckets = [
        {
            "device_key": key,
            "window_start_us": window,
            "width_us": bucket_us,
            "outbound_bytes": total,
        }
        for (key, window), total in sorted(buckets.items())
    ]

    manifest = {
        "scenario": spec.to_dict(),
        "packet_count": len(packets),
        "dns_responses": dns_packets,
        "flows": flow_packets,
        "domain_ips": dict(sorted(domain_ip.items())),
        "domains": {
            normalize_fqdn(d.fqdn): {
                "events": round(d.rate_per_min * spec.duration_s / 60),
                "is_tracker": d.is_tracker,
            }
            for d in spec.domains
        },
        "fixture": {
            "filter_list_name": FIXTURE_LIST_NAME,
            "filter_list": "".join(
                f"0.0.0.0 {name}\n" for name, is_tracker in sorted(tracker_flags.items()) if is_tracker
            ),
            "org_table": "".join(f"{sld}\t{org}\n" for sld, org in sorted(org_map.items())),
        },
        "expected": {
            "devices": [
                {
                    "device_key": d.device_key,
                    "display_name": d.display_name or d.device_key,
                    "first_seen_us": device_first[d.device_key],
                    "last_seen_us": device_last[d.device_key],
                    "addresses": sorted(device_addresses[d.device_key]),
                }
                for d in sorted(spec.devices, key=lambda d: d.device_key)
                if d.device_key in device_first
            ],
            "domain_stats": expected_stats,
            "traffic_buckets": expected_buckets,
            "dns_timeseries": {
                key: _zero_filled(series, bucket_us) for key, series in sorted(dns_series.items())
            },
            "top_trackers": _top5(expected_stats, "tracker"),
            "top_non_trackers": _top5(expected_stats, "non_tracker"),
            "device_pie": [
                [key, total]
                for key, total in sorted(_sum_by(expected_stats, "device_key").items())
            ],
            "alluvial_edges": _alluvial_edges(expected_stats),
            "unresolved_bytes": dict(sorted(unresolved_bytes.items())),
        },
    }
    return pcap, manifest


def _device_v6(device: DeviceSpec) -> str:
    # stable per-device v6 address derived from the v4 one
    tail = int(ipaddress.IPv4Address(device.ip))
    return str(ipaddress.IPv6Address((0xFD00 << 112) + tail))


def _zero_filled(series: dict[int, int], width_us: int) -> list[list[int]]:
    start, end = min(series), max(series)
    out = []
    current = start
    while current <= end:
        out.append([current, series.get(current, 0)])
        current += width_us
    return out


def _sum_by(stats: list[dict], field_name: str) -> dict[str, int]:
    totals: dict[str, int] = {}
    for row in stats:
        totals[row[field_name]] = totals.get(row[field_name], 0) + row["access_count"]
    return totals


def _top5(stats: list[dict], label: str) -> list[list]:
    totals: dict[str, int] = {}
    for row in stats:
        if row["label"] == label:
            totals[row["fqdn"]] = totals.get(row["fqdn"], 0) + row["access_count"]
    ranked = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
    return [[fqdn, count] for fqdn, count in ranked[:5]]


def _alluvial_edges(stats: list[dict]) -> list[dict]:
    device_sld: dict[tuple[str, str], int] = {}
    sld_org: dict[tuple[str, str], int] = {}
    org_label: dict[tuple[str, str], int] = {}
    for row in stats:
        sld = row["sld"] or row["fqdn"]
        count = row["access_count"]
        device_sld[(row["device_key"], sld)] = device_sld.get((row["device_key"], sld), 0) + count
        sld_org[(sld, row["organization"])] = sld_org.get((sld, row["organization"]), 0) + count
        org_label[(row["organization"], row["label"])] = (
            org_label.get((row["organization"], row["label"]), 0) + count
        )
    edges = []
    for (layers, pairs) in (
        (("device", "sld"), device_sld),
        (("sld", "organization"), sld_org),
        (("organization", "label"), org_label),
    ):
        for (src, dst), weight in sorted(pairs.items()):
            edges.append(
                {
                    "source": {"layer": layers[0], "name": src},
                    "target": {"layer": layers[1], "name": dst},
                    "weight": weight,
                }
            )
    return edges


class StubResolver:
    """Tiny UDP resolver answering A/AAAA from a fixed name->IP mapping.

    Stands in for the real upstream in demo mode and end-to-end tests;
    unknown names get NXDOMAIN.  An optional delay simulates a slow
    upstream for timeout handling.
    """

    def __init__(self, mapping: dict[str, str], *, host: str = "127.0.0.1", port: int = 0, delay_s: float = 0.0):
        self.mapping = {normalize_fqdn(k): v for k, v in mapping.items()}
        self.host = host
        self.port = port
        self.delay_s = delay_s
        self.queries: list[str] = []
        self._sock = None
        self._thread: threading.Thread | None = None
        self._running = threading.Event()

    @property
    def address(self) -> tuple[str, int]:
        assert self._sock is not None, "resolver not started"
        return self._sock.getsockname()[:2]

    def start(self) -> None:
        import socket

        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sock.bind((self.host, self.port))
        sock.settimeout(0.2)
        self._sock = sock
        self._running.set()
        self._thread = threading.Thread(target=self._serve, name="stub-resolver", daemon=True)
        self._thread.start()

    def _serve(self) -> None:
        import socket

        from .dnswire import (
            RCODE_NXDOMAIN,
            MalformedPacket,
            decode_query,
            error_response,
            reply_with_question,
        )

        assert self._sock is not None
        while self._running.is_set():
            try:
                wire, client = self._sock.recvfrom(4096)
            except socket.timeout:
                continue
            except OSError:
                break
            if self.delay_s:
                time.sleep(self.delay_s)
            try:
                msg = decode_query(wire)
            except MalformedPacket:
                self._sock.sendto(error_response(wire, RCODE_NXDOMAIN), client)
                continue
            qname = msg.questions[0].qname
            self.queries.append(qname)
            value = self.mapping.get(qname)
            if value is None:
                response = reply_with_question(wire, [], rcode=RCODE_NXDOMAIN)
            elif ":" in value:
                response = reply_with_question(wire, [(TYPE_AAAA, 300, value)])
            else:
                response = reply_with_question(wire, [(TYPE_A, 300, value)])
            try:
                self._sock.sendto(response, client)
            except OSError:
                pass

    def stop(self) -> None:
        self._running.clear()
        if self._thread is not None:
            self._thread.join(timeout=2)
        if self._sock is not None:
            self._sock.close()
            self._sock = None


class DemoFeed:
    """Replays a generated scenario into a frame sink in accelerated time."""

    def __init__(
        self,
        spec: ScenarioSpec,
        sink: Callable[[int, int, bytes], None],
        *,
        speed: float = 1.0,
    ):
        if speed <= 0:
            raise ValueError("speed must be positive")
        self.spec = spec
        self.sink = sink
        self.speed = speed
        self.pcap, self.manifest = generate(spec)
        self._pause = threading.Event()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def pause(self) -> None:
        self._pause.set()

    def resume(self) -> None:
        self._pause.clear()

    def stop(self) -> None:
        self._stop.set()
        self.resume()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def start(self) -> None:
        self._thread = threading.Thread(target=self.run, name="demo-feed", daemon=True)
        self._thread.start()

    def run(self) -> None:
        from .capture import read_pcap

        previous_ts: int | None = None
        for ts_sec, ts_nsec, frame in read_pcap(self.pcap):
            if self._stop.is_set():
                return
            while self._pause.is_set() and not self._stop.is_set():
                time.sleep(0.01)
            ts_us = ts_sec * 1_000_000 + ts_nsec // 1000
            if previous_ts is not None and ts_us > previous_ts:
                time.sleep((ts_us - previous_ts) / 1_000_000 / self.speed)
            previous_ts = ts_us
            self.sink(ts_sec, ts_nsec, frame)
