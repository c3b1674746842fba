"""Independent DNS message builder used as the parser's test oracle.

Written directly from the RFC 1035 message layout with no code shared
with the package's encoder: byte assembly is explicit, compression
offsets are tracked in a plain dictionary keyed by the remaining label
tuple, and header fields are packed by hand.  If the product parser and
this builder agree on randomized messages, compression handling and
record layout are right by two routes.
"""

from __future__ import annotations

import ipaddress
import struct

QTYPE_A = 1
QTYPE_CNAME = 5
QTYPE_TXT = 16
QTYPE_AAAA = 28


class MessageBytes:
    def __init__(self) -> None:
        self.buf = bytearray()
        # (label, label, ...) -> offset of that suffix's first byte
        self.name_offsets: dict[tuple[str, ...], int] = {}

    def u16(self, value: int) -> None:
        self.buf += struct.pack(">H", value)

    def u32(self, value: int) -> None:
        self.buf += struct.pack(">I", value)

    def raw(self, data: bytes) -> None:
        self.buf += data

    def name(self, name: str, *, compress: bool) -> None:
        labels = tuple(label for label in name.split(".") if label)
        index = 0
        while index < len(labels):
            remaining = tuple(label.lower() for label in labels[index:])
            if compress and remaining in self.name_offsets:
                self.u16(0xC000 | self.name_offsets[remaining])
                return
            if len(self.buf) < 0x3FFF:
                self.name_offsets.setdefault(remaining, len(self.buf))
            encoded = labels[index].encode("ascii")
            self.buf.append(len(encoded))
            self.raw(encoded)
            index += 1
        self.buf.append(0)


def rdata_for(rtype: int, value: str) -> bytes:
    if rtype == QTYPE_A:
        return ipaddress.IPv4Address(value).packed
    if rtype == QTYPE_AAAA:
        return ipaddress.IPv6Address(value).packed
    if rtype == QTYPE_TXT:
        data = value.encode("ascii")
        return bytes([len(data)]) + data
    raise AssertionError(f"oracle builder does not know type {rtype}")


def build_response(
    txid: int,
    qname: str,
    qtype: int,
    answers: list[tuple[str, int, int, str]],
    *,
    compress: bool = True,
    qr: bool = True,
    rcode: int = 0,
    ancount_override: int | None = None,
) -> bytes:
    """Assemble a response; answers are (owner, rtype, ttl, value) tuples."""
    message = MessageBytes()
    flags = (0x8000 if qr else 0) | 0x0100 | 0x0080 | (rcode & 0xF)
    message.u16(txid)
    message.u16(flags)
    message.u16(1)  # qdcount
    message.u16(ancount_override if ancount_override is not None else len(answers))
    message.u16(0)
    message.u16(0)
    message.name(qname, compress=compress)
    message.u16(qtype)
    message.u16(1)
    for owner, rtype, ttl, value in answers:
        message.name(owner, compress=compress)
        message.u16(rtype)
        message.u16(1)
        message.u32(ttl)
        # rdata length is only known after compression decisions
        placeholder = len(message.buf)
        message.u16(0)
        rdata = _append_rdata(message, rtype, value, compress=compress)
        struct.pack_into(">H", message.buf, placeholder, rdata)
    return bytes(message.buf)


def _append_rdata(message: MessageBytes, rtype: int, value: str, *, compress: bool) -> int:
    before = len(message.buf)
    if rtype == QTYPE_CNAME:
        # CNAME targets may compress against earlier names in the message
        message.name(value, compress=compress)
    else:
        message.raw(rdata_for(rtype, value))
    return len(message.buf) - before


def build_query(txid: int, qname: str, qtype: int) -> bytes:
    message = MessageBytes()
    message.u16(txid)
    message.u16(0x0100)
    message.u16(1)
    message.u16(0)
    message.u16(0)
    message.u16(0)
    message.name(qname, compress=False)
    message.u16(qtype)
    message.u16(1)
    return bytes(message.buf)
