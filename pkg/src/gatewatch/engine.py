"""Turns captured packets into typed DNS and flow events attributed to devices.

The engine keeps the IP-to-domain map current from observed DNS answers
and names later TCP/UDP flows through it; devices often answer from
their local resolver cache, so flows, not queries, are what show which
domains are being contacted right now.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

from . import dnswire
from .capture import FrameDecodeError, Protocol, RawPacketMeta, decode_frame
from .names import is_valid_fqdn, normalize_fqdn

DEFAULT_MAP_TTL_US = 24 * 3600 * 1_000_000

DNS_PORT = 53

UNKNOWN_DEVICE = "unknown"


class RecordType(Enum):
    A = "A"
    AAAA = "AAAA"
    CNAME = "CNAME"


_WIRE_TO_RECORD = {
    dnswire.TYPE_A: RecordType.A,
    dnswire.TYPE_AAAA: RecordType.AAAA,
    dnswire.TYPE_CNAME: RecordType.CNAME,
}


@dataclass(frozen=True)
class DnsAnswerEvent:
    ts_us: int
    device_key: str
    qname: str
    answers: tuple[tuple[RecordType, str], ...]
    ancount: int


@dataclass(frozen=True)
class FlowEvent:
    ts_us: int
    device_key: str
    protocol: Protocol
    dst_ip: str
    dst_port: int
    payload_bytes: int


@dataclass
class KnownDevice:
    device_key: str
    display_name: str = ""
    mac: str | None = None
    ips: tuple[str, ...] = ()


class DeviceRegistry:
    """Resolves packet source/destination addresses to device keys.

    MAC is the primary key; source IP is the fallback.  With
    ``monitor_unregistered`` enabled (the default for bare replays),
    unregistered sources become devices keyed by their MAC, or by their
    IP when the capture has no link layer, so nothing is silently lost.
    """

    def __init__(self, devices: Iterable[KnownDevice] = (), *, monitor_unregistered: bool = True):
        self._by_mac: dict[str, str] = {}
        self._by_ip: dict[str, str] = {}
        self.display_names: dict[str, str] = {}
        self.monitor_unregistered = monitor_unregistered
        for dev in devices:
            self.register(dev)

    def register(self, dev: KnownDevice) -> None:
        if dev.mac:
            self._by_mac[dev.mac.lower()] = dev.device_key
        for ip in dev.ips:
            self._by_ip[ip] = dev.device_key
        self.display_names[dev.device_key] = dev.display_name or dev.device_key

    def learn_ip(self, ip: str, device_key: str) -> None:
        self._by_ip.setdefault(ip, device_key)

    def resolve_source(self, meta: RawPacketMeta) -> str | None:
        if meta.src_mac and meta.src_mac in self._by_mac:
            return self._by_mac[meta.src_mac]
        if meta.src_ip in self._by_ip:
            return self._by_ip[meta.src_ip]
        if not self.monitor_unregistered:
            return None
        if meta.src_mac:
            return meta.src_mac
        if meta.src_ip:
            return meta.src_ip
        return UNKNOWN_DEVICE

    def resolve_ip(self, ip: str) -> str | None:
        if ip in self._by_ip:
            return self._by_ip[ip]
        if self.monitor_unregistered:
            return ip or UNKNOWN_DEVICE
        return None

    def resolve_dst(self, meta: RawPacketMeta) -> str | None:
        """Attribute a DNS response to its destination (the querying device)."""
        if meta.dst_mac and meta.dst_mac in self._by_mac:
            return self._by_mac[meta.dst_mac]
        if meta.dst_ip in self._by_ip:
            return self._by_ip[meta.dst_ip]
        if not self.monitor_unregistered:
            return None
        if meta.dst_mac:
            return meta.dst_mac
        if meta.dst_ip:
            return meta.dst_ip
        return UNKNOWN_DEVICE


class IpDomainMap:
    """IP address -> (fqdn, last update timestamp), last writer wins.

    Concurrent reads are safe against serialized writers; each entry is
    swapped in as one tuple so readers never observe a torn pair.
    Entries older than the TTL are treated as absent.
    """

    def __init__(self, *, ttl_us: int = DEFAULT_MAP_TTL_US):
        self._entries: dict[str, tuple[str, int]] = {}
        self._lock = threading.Lock()
        self.ttl_us = ttl_us

    def update(self, ip: str, fqdn: str, ts_us: int) -> None:
        with self._lock:
            current = self._entries.get(ip)
            if current is None or ts_us >= current[1]:
                self._entries[ip] = (fqdn, ts_us)

    def lookup(self, ip: str, now_us: int | None = None) -> str | None:
        entry = self._entries.get(ip)
        if entry is None:
            return None
        fqdn, ts_us = entry
        if now_us is not None and now_us - ts_us > self.ttl_us:
            return None
        return fqdn

    def evict_expired(self, now_us: int) -> int:
        with self._lock:
            stale = [ip for ip, (_, ts) in self._entries.items() if now_us - ts > self.ttl_us]
            for ip in stale:
                del self._entries[ip]
        return len(stale)

    def __len__(self) -> int:
        return len(self._entries)

    def items(self) -> list[tuple[str, str, int]]:
        return [(ip, fqdn, ts) for ip, (fqdn, ts) in self._entries.items()]


UNRESOLVED = "unresolved"


def resolve_flow_domain(flow: FlowEvent, ip_map: IpDomainMap) -> str | None:
    """Name the flow's destination from the map; None means unresolved.

    Unresolved flows still count toward traffic totals under the
    ``unresolved`` label.
    """
    return ip_map.lookup(flow.dst_ip, flow.ts_us)


@dataclass
class Counters:
    """Per-source accounting: packets in == events out + drops."""

    packets: int = 0
    events: int = 0
    drops: dict[str, int] = field(default_factory=dict)

    def drop(self, reason: str) -> None:
        self.drops[reason] = self.drops.get(reason, 0) + 1

    @property
    def dropped(self) -> int:
        return sum(self.drops.values())


class PacketEngine:
    def __init__(
        self,
        registry: DeviceRegistry | None = None,
        ip_map: IpDomainMap | None = None,
    ):
        self.registry = registry if registry is not None else DeviceRegistry()
        self.ip_map = ip_map if ip_map is not None else IpDomainMap()
        self.counters = Counters()

    def parse_dns_response(self, payload: bytes, meta: RawPacketMeta) -> DnsAnswerEvent | None:
        """Parse a UDP port-53 payload; None for queries and empty responses.

        Raises dnswire.MalformedPacket for bytes that do not decode; the
        caller drops the packet and counts it.
        """
        msg = dnswire.decode_message(payload)
        if not msg.is_response or msg.ancount == 0:
            return None
        if msg.questions:
            qname = msg.questions[0].qname
        else:
            qname = msg.answers[0].name
        qname = normalize_fqdn(qname)
        if not is_valid_fqdn(qname):
            raise dnswire.MalformedPacket(f"invalid query name {qname!r}")
        answers = []
        for record in msg.answers:
            rtype = _WIRE_TO_RECORD.get(record.rtype)
            if rtype is None or record.value is None:
                continue  # unsupported record types are skipped, not fatal
            answers.append((rtype, record.value))
        device_key = self.registry.resolve_dst(meta) or UNKNOWN_DEVICE
        return DnsAnswerEvent(
            ts_us=meta.ts_us,
            device_key=device_key,
            qname=qname,
            answers=tuple(answers),
            ancount=msg.ancount,
        )

    def ingest(self, meta: RawPacketMeta) -> list[DnsAnswerEvent | FlowEvent]:
        """Route one packet: DNS responses update the map, the rest flow."""
        self.counters.packets += 1
        events: list[DnsAnswerEvent | FlowEvent] = []

        if meta.protocol is Protocol.UDP and DNS_PORT in (meta.src_port, meta.dst_port):
            try:
                event = self.parse_dns_response(meta.payload, meta)
            except dnswire.MalformedPacket:
                self.counters.drop("malformed_packet")
                return events
            if event is None:
                self.counters.drop("not_dns_response")
                return events
            for rtype, value in event.answers:
                if rtype in (RecordType.A, RecordType.AAAA):
                    # map to the name the device asked for, not the CNAME target
                    self.ip_map.update(value, event.qname, event.ts_us)
            if event.device_key != UNKNOWN_DEVICE or self.registry.monitor_unregistered:
                events.append(event)
                self.counters.events += 1
            else:
                self.counters.drop("unmonitored")
            return events

        if meta.protocol is Protocol.OTHER:
            self.counters.drop("other_protocol")
            return events

        device_key = self.registry.resolve_source(meta)
        if device_key is None:
            self.counters.drop("unmonitored")
            return events
        self.registry.learn_ip(meta.src_ip, device_key)
        events.append(
            FlowEvent(
                ts_us=meta.ts_us,
                device_key=device_key,
                protocol=meta.protocol,
                dst_ip=meta.dst_ip,
                dst_port=meta.dst_port,
                payload_bytes=len(meta.payload),
            )
        )
        self.counters.events += 1
        return events

    def ingest_frames(
        self, frames: Iterable[tuple[int, int, bytes]]
    ) -> Iterator[DnsAnswerEvent | FlowEvent]:
        """Decode and ingest raw frames, keeping the conservation counters."""
        for ts_sec, ts_nsec, frame in frames:
            try:
                meta = decode_frame(ts_sec, ts_nsec, frame)
            except FrameDecodeError as exc:
                self.counters.packets += 1
                self.counters.drop(exc.reason)
                continue
            yield from self.ingest(meta)
