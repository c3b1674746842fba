"""Packet capture sources: pcap files and a live-socket stub.

Reads the classic libpcap file format (both byte orders, microsecond
and nanosecond timestamp variants) and decodes Ethernet/IPv4/IPv6
frames down to transport payloads.  Only Ethernet link-layer captures
are accepted; anything else is rejected up front with a clear error.
"""

from __future__ import annotations

import ipaddress
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator

LINKTYPE_ETHERNET = 1

_MAGIC_US = 0xA1B2C3D4
_MAGIC_NS = 0xA1B23C4D

ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_IPV6 = 0x86DD
ETHERTYPE_VLAN = 0x8100

IPPROTO_TCP = 6
IPPROTO_UDP = 17


class PcapError(ValueError):
    """File is not a pcap capture or uses an unsupported link type."""


class FrameDecodeError(ValueError):
    """Frame cannot be decoded to a transport payload; carries a reason tag."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class Protocol(Enum):
    TCP = "tcp"
    UDP = "udp"
    OTHER = "other"


@dataclass(frozen=True)
class RawPacketMeta:
    """A decoded captured packet: addressing metadata plus transport payload."""

    ts_sec: int
    ts_nsec: int
    src_mac: str | None
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    protocol: Protocol
    payload: bytes
    dst_mac: str | None = None

    @property
    def ts_us(self) -> int:
        return self.ts_sec * 1_000_000 + self.ts_nsec // 1000


def _mac_str(raw: bytes) -> str:
    return ":".join(f"{b:02x}" for b in raw)


def decode_frame(ts_sec: int, ts_nsec: int, frame: bytes) -> RawPacketMeta:
    """Decode an Ethernet frame to RawPacketMeta.

    Raises FrameDecodeError with a reason tag for anything that is not a
    complete, unfragmented IPv4/IPv6 packet.
    """
    if len(frame) < 14:
        raise FrameDecodeError("runt_frame")
    dst_mac = _mac_str(frame[0:6])
    src_mac = _mac_str(frame[6:12])
    ethertype = struct.unpack_from("!H", frame, 12)[0]
    offset = 14
    if ethertype == ETHERTYPE_VLAN:
        if len(frame) < 18:
            raise FrameDecodeError("runt_frame")
        ethertype = struct.unpack_from("!H", frame, 16)[0]
        offset = 18

    if ethertype == ETHERTYPE_IPV4:
        if len(frame) < offset + 20:
            raise FrameDecodeError("truncated_ip")
        vihl = frame[offset]
        if vihl >> 4 != 4:
            raise FrameDecodeError("bad_ip_version")
        ihl = (vihl & 0xF) * 4
        if ihl < 20 or len(frame) < offset + ihl:
            raise FrameDecodeError("truncated_ip")
        total_len = struct.unpack_from("!H", frame, offset + 2)[0]
        if total_len < ihl or len(frame) < offset + total_len:
            raise FrameDecodeError("truncated_ip")
        frag = struct.unpack_from("!H", frame, offset + 6)[0]
        if frag & 0x1FFF:
            raise FrameDecodeError("ip_fragment")
        proto = frame[offset + 9]
        src_ip = str(ipaddress.IPv4Address(frame[offset + 12 : offset + 16]))
        dst_ip = str(ipaddress.IPv4Address(frame[offset + 16 : offset + 20]))
        transport = frame[offset + ihl : offset + total_len]
    elif ethertype == ETHERTYPE_IPV6:
        if len(frame) < offset + 40:
            raise FrameDecodeError("truncated_ip")
        payload_len = struct.unpack_from("!H", frame, offset + 4)[0]
        proto = frame[offset + 6]
        src_ip = str(ipaddress.IPv6Address(frame[offset + 8 : offset + 24]))
        dst_ip = str(ipaddress.IPv6Address(frame[offset + 24 : offset + 40]))
        end = offset + 40 + payload_len
        if len(frame) < end:
            raise FrameDecodeError("truncated_ip")
        # extension headers are not walked; they surface as OTHER below
        transport = frame[offset + 40 : end]
    else:
        raise FrameDecodeError("not_ip")

    if proto == IPPROTO_UDP:
        if len(transport) < 8:
            raise FrameDecodeError("truncated_transport")
        src_port, dst_port, udp_len = struct.unpack_from("!HHH", transport, 0)
        if udp_len < 8 or udp_len > len(transport):
            raise FrameDecodeError("truncated_transport")
        payload = transport[8:udp_len]
        protocol = Protocol.UDP
    elif proto == IPPROTO_TCP:
        if len(transport) < 20:
            raise FrameDecodeError("truncated_transport")
        src_port, dst_port = struct.unpack_from("!HH", transport, 0)
        data_off = (transport[12] >> 4) * 4
        if data_off < 20 or data_off > len(transport):
            raise FrameDecodeError("truncated_transport")
        payload = transport[data_off:]
        protocol = Protocol.TCP
    else:
        src_port = dst_port = 0
        payload = b""
        protocol = Protocol.OTHER

    return RawPacketMeta(
        ts_sec=ts_sec,
        ts_nsec=ts_nsec,
        src_mac=src_mac,
        src_ip=src_ip,
        dst_ip=dst_ip,
        src_port=src_port,
        dst_port=dst_port,
        protocol=protocol,
        payload=payload,
        dst_mac=dst_mac,
    )


def read_pcap(data: bytes) -> Iterator[tuple[int, int, bytes]]:
    """Yield (ts_sec, ts_nsec, frame) from a pcap byte string."""
    if len(data) < 24:
        raise PcapError("not a pcap file (short header)")
    magic = struct.unpack_from("<I", data, 0)[0]
    if magic == _MAGIC_US:
        endian, ns = "<", False
    elif magic == _MAGIC_NS:
        endian, ns = "<", True
    else:
        magic_be = struct.unpack_from(">I", data, 0)[0]
        if magic_be == _MAGIC_US:
            endian, ns = ">", False
        elif magic_be == _MAGIC_NS:
            endian, ns = ">", True
        else:
            raise PcapError("not a pcap file (bad magic)")
    linktype = struct.unpack_from(endian + "I", data, 20)[0]
    if linktype != LINKTYPE_ETHERNET:
        raise PcapError(f"unsupported link type {linktype}; only Ethernet captures are supported")
    offset = 24
    rec = struct.Struct(endian + "IIII")
    while offset < len(data):
        if offset + 16 > len(data):
            raise PcapError("truncated packet record header")
        ts_sec, ts_frac, incl_len, _orig_len = rec.unpack_from(data, offset)
        offset += 16
        if offset + incl_len > len(data):
            raise PcapError("truncated packet record")
        frame = data[offset : offset + incl_len]
        offset += incl_len
        yield ts_sec, (ts_frac if ns else ts_frac * 1000), frame


def read_pcap_file(path: str) -> Iterator[tuple[int, int, bytes]]:
    with open(path, "rb") as fh:
        data = fh.read()
    yield from read_pcap(data)


def write_pcap(packets: Iterable[tuple[int, int, bytes]], *, nanosecond: bool = False) -> bytes:
    """Serialize (ts_sec, ts_nsec, frame) tuples as a little-endian pcap."""
    out = bytearray(
        struct.pack(
            "<IHHiIII",
            _MAGIC_NS if nanosecond else _MAGIC_US,
            2,
            4,
            0,
            0,
            65535,
            LINKTYPE_ETHERNET,
        )
    )
    for ts_sec, ts_nsec, frame in packets:
        frac = ts_nsec if nanosecond else ts_nsec // 1000
        out += struct.pack("<IIII", ts_sec, frac, len(frame), len(frame))
        out += frame
    return bytes(out)


# ----------------------------------------------------------------------------
# Frame construction (used by the traffic generator and tests)


def build_ethernet(src_mac: str, dst_mac: str, ethertype: int, payload: bytes) -> bytes:
    def mac(m: str) -> bytes:
        return bytes(int(p, 16) for p in m.split(":"))

    return mac(dst_mac) + mac(src_mac) + struct.pack("!H", ethertype) + payload


def build_ipv6(src_ip: str, dst_ip: str, proto: int, payload: bytes) -> bytes:
    return (
        struct.pack(
            "!IHBB",
            6 << 28,
            len(payload),
            proto,
            64,
        )
        + ipaddress.IPv6Address(src_ip).packed
        + ipaddress.IPv6Address(dst_ip).packed
        + payload
    )


def build_ipv4(src_ip: str, dst_ip: str, proto: int, payload: bytes) -> bytes:
    total = 20 + len(payload)
    header = struct.pack(
        "!BBHHHBBH4s4s",
        0x45,
        0,
        total,
        0,
        0x4000,  # DF, no fragments
        64,
        proto,
        0,
        ipaddress.IPv4Address(src_ip).packed,
        ipaddress.IPv4Address(dst_ip).packed,
    )
    checksum = _ipv4_checksum(header)
    header = header[:10] + struct.pack("!H", checksum) + header[12:]
    return header + payload


def _ipv4_checksum(header: bytes) -> int:
    total = 0
    for i in range(0, len(header), 2):
        total += struct.unpack_from("!H", header, i)[0]
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def build_udp(src_port: int, dst_port: int, payload: bytes) -> bytes:
    return struct.pack("!HHHH", src_port, dst_port, 8 + len(payload), 0) + payload


def build_tcp(src_port: int, dst_port: int, payload: bytes) -> bytes:
    # minimal 20-byte header, PSH+ACK; checksum left zero (not verified on decode)
    return (
        struct.pack("!HHIIBBHHH", src_port, dst_port, 1, 1, 5 << 4, 0x18, 65535, 0, 0) + payload
    )


def _build_ip(src_ip: str, dst_ip: str, proto: int, payload: bytes) -> tuple[int, bytes]:
    if ":" in src_ip:
        return ETHERTYPE_IPV6, build_ipv6(src_ip, dst_ip, proto, payload)
    return ETHERTYPE_IPV4, build_ipv4(src_ip, dst_ip, proto, payload)


def build_udp_packet(
    src_mac: str, src_ip: str, src_port: int, dst_mac: str, dst_ip: str, dst_port: int, payload: bytes
) -> bytes:
    ethertype, ip = _build_ip(src_ip, dst_ip, IPPROTO_UDP, build_udp(src_port, dst_port, payload))
    return build_ethernet(src_mac, dst_mac, ethertype, ip)


def build_tcp_packet(
    src_mac: str, src_ip: str, src_port: int, dst_mac: str, dst_ip: str, dst_port: int, payload: bytes
) -> bytes:
    ethertype, ip = _build_ip(src_ip, dst_ip, IPPROTO_TCP, build_tcp(src_port, dst_port, payload))
    return build_ethernet(src_mac, dst_mac, ethertype, ip)


class LiveSource:
    """AF_PACKET capture on a network interface (requires CAP_NET_RAW).

    Kept behind the same (ts_sec, ts_nsec, frame) iterator contract as
    pcap files so everything downstream is testable without privileges.
    """

    def __init__(self, interface: str):
        self.interface = interface
        self._sock = None

    def __iter__(self) -> Iterator[tuple[int, int, bytes]]:
        import socket
        import time

        try:
            sock = socket.socket(socket.AF_PACKET, socket.SOCK_RAW, socket.htons(3))
            sock.bind((self.interface, 0))
        except (PermissionError, OSError) as exc:
            raise PermissionError(
                f"live capture on {self.interface!r} needs CAP_NET_RAW (try replay/demo mode): {exc}"
            ) from exc
        self._sock = sock
        while True:
            frame = sock.recv(65535)
            now = time.time_ns()
            yield now // 1_000_000_000, now % 1_000_000_000, frame

    def close(self) -> None:
        if self._sock is not None:
            self._sock.close()
            self._sock = None
