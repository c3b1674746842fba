"""DNS wire-format encoding and decoding (RFC 1035 subset).

Decodes queries and responses carrying A, AAAA, and CNAME records,
following name-compression pointers; other record types in a message
are walked over but not interpreted.  Encoding supports query and
response synthesis with optional name compression, which the sinkhole
and the traffic generator both rely on.

Every decode failure raises :class:`MalformedPacket`; arbitrary input
bytes never escape as IndexError/UnicodeDecodeError or similar.
"""

from __future__ import annotations

import ipaddress
import struct
from dataclasses import dataclass, field

MAX_ENCODED_NAME = 255  # RFC 1035 total octets, incl. length bytes
MAX_LABEL = 63
MAX_POINTER_JUMPS = 64

# Record types we interpret; everything else is skipped by rdlength.
TYPE_A = 1
TYPE_CNAME = 5
TYPE_AAAA = 28
TYPE_NAMES = {TYPE_A: "A", TYPE_CNAME: "CNAME", TYPE_AAAA: "AAAA"}

CLASS_IN = 1

RCODE_NOERROR = 0
RCODE_FORMERR = 1
RCODE_SERVFAIL = 2
RCODE_NXDOMAIN = 3

_HEADER = struct.Struct("!HHHHHH")

# wire labels: printable ASCII excluding space and the label separator
_WIRE_LABEL_OK = frozenset(
    b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_*"
)


class MalformedPacket(ValueError):
    """Raised for any byte sequence that does not decode as a DNS message."""


@dataclass(frozen=True)
class Question:
    qname: str
    qtype: int
    qclass: int


@dataclass(frozen=True)
class Record:
    name: str
    rtype: int
    rclass: int
    ttl: int
    value: str | None  # dotted IP for A/AAAA, target name for CNAME, None otherwise


@dataclass
class Message:
    txid: int
    flags: int
    questions: list[Question] = field(default_factory=list)
    answers: list[Record] = field(default_factory=list)

    @property
    def is_response(self) -> bool:
        return bool(self.flags & 0x8000)

    @property
    def opcode(self) -> int:
        return (self.flags >> 11) & 0xF

    @property
    def rcode(self) -> int:
        return self.flags & 0xF

    @property
    def ancount(self) -> int:
        return len(self.answers)


def decode_name(buf: bytes, offset: int) -> tuple[str, int]:
    """Decode a possibly-compressed name starting at ``offset``.

    Returns (lowercased presentation name without trailing dot, offset
    just past the name in the original stream).
    """
    labels: list[str] = []
    encoded_len = 0
    jumps = 0
    next_offset = -1  # resume point in the original stream, set on first jump
    pos = offset
    seen: set[int] = set()
    while True:
        if pos >= len(buf):
            raise MalformedPacket("name runs past end of message")
        length = buf[pos]
        if length & 0xC0 == 0xC0:
            if pos + 1 >= len(buf):
                raise MalformedPacket("truncated compression pointer")
            target = ((length & 0x3F) << 8) | buf[pos + 1]
            if next_offset < 0:
                next_offset = pos + 2
            jumps += 1
            if jumps > MAX_POINTER_JUMPS or target in seen:
                raise MalformedPacket("compression pointer loop")
            seen.add(target)
            if target >= len(buf):
                raise MalformedPacket("compression pointer out of range")
            pos = target
            continue
        if length & 0xC0:
            raise MalformedPacket("reserved label type")
        if length == 0:
            pos += 1
            break
        if length > MAX_LABEL:
            raise MalformedPacket("label overflow")
        encoded_len += length + 1
        if encoded_len > MAX_ENCODED_NAME:
            raise MalformedPacket("name too long")
        end = pos + 1 + length
        if end > len(buf):
            raise MalformedPacket("label runs past end of message")
        raw = buf[pos + 1 : end]
        if not set(raw) <= _WIRE_LABEL_OK:
            raise MalformedPacket("label contains unsupported bytes")
        labels.append(raw.decode("ascii").lower())
        pos = end
    return ".".join(labels), (next_offset if next_offset >= 0 else pos)


def _decode_record(buf: bytes, offset: int) -> tuple[Record, int]:
    name, offset = decode_name(buf, offset)
    if offset + 10 > len(buf):
        raise MalformedPacket("truncated record header")
    rtype, rclass, ttl, rdlength = struct.unpack_from("!HHIH", buf, offset)
    offset += 10
    rdata_end = offset + rdlength
    if rdata_end > len(buf):
        raise MalformedPacket("truncated rdata")
    value: str | None = None
    if rtype == TYPE_A:
        if rdlength != 4:
            raise MalformedPacket("A record with bad rdlength")
        value = str(ipaddress.IPv4Address(buf[offset:rdata_end]))
    elif rtype == TYPE_AAAA:
        if rdlength != 16:
            raise MalformedPacket("AAAA record with bad rdlength")
        value = str(ipaddress.IPv6Address(buf[offset:rdata_end]))
    elif rtype == TYPE_CNAME:
        value, _ = decode_name(buf, offset)
    return Record(name, rtype, rclass, ttl, value), rdata_end


def decode_message(buf: bytes) -> Message:
    """Decode header, question section, and answer section.

    Authority/additional sections are not decoded; the answer section is
    walked record by record so a declared ANCount that the bytes cannot
    back raises MalformedPacket.
    """
    if len(buf) < 12:
        raise MalformedPacket("truncated header")
    txid, flags, qdcount, ancount, _nscount, _arcount = _HEADER.unpack_from(buf)
    msg = Message(txid=txid, flags=flags)
    offset = 12
    for _ in range(qdcount):
        qname, offset = decode_name(buf, offset)
        if offset + 4 > len(buf):
            raise MalformedPacket("truncated question")
        qtype, qclass = struct.unpack_from("!HH", buf, offset)
        offset += 4
        msg.questions.append(Question(qname, qtype, qclass))
    for _ in range(ancount):
        record, offset = _decode_record(buf, offset)
        msg.answers.append(record)
    return msg


def decode_query(buf: bytes) -> Message:
    """Decode a message and require exactly one question (sinkhole input)."""
    msg = decode_message(buf)
    if not msg.questions:
        raise MalformedPacket("query without question section")
    return msg


# ----------------------------------------------------------------------------
# Encoding


def encode_name(name: str, compress: dict[str, int] | None, offset: int) -> bytes:
    """Encode a name, optionally compressing against previously written names.

    ``compress`` maps already-emitted names (full suffixes) to their
    offsets and is updated in place; ``offset`` is where this name will
    be written in the message.
    """
    out = bytearray()
    labels = name.rstrip(".").split(".") if name else []
    if name == "" or labels == [""]:
        labels = []
    for i in range(len(labels)):
        suffix = ".".join(labels[i:])
        if compress is not None and suffix in compress:
            pointer = compress[suffix]
            out += struct.pack("!H", 0xC000 | pointer)
            return bytes(out)
        if compress is not None and offset + len(out) < 0x4000:
            compress[suffix] = offset + len(out)
        label = labels[i].encode("ascii")
        if not 0 < len(label) <= MAX_LABEL:
            raise ValueError(f"bad label in {name!r}")
        out.append(len(label))
        out += label
    out.append(0)
    return bytes(out)


def _encode_rdata(rtype: int, value: str, compress: dict[str, int] | None, offset: int) -> bytes:
    if rtype == TYPE_A:
        return ipaddress.IPv4Address(value).packed
    if rtype == TYPE_AAAA:
        return ipaddress.IPv6Address(value).packed
    if rtype == TYPE_CNAME:
        return encode_name(value, compress, offset)
    raise ValueError(f"cannot encode rdata for type {rtype}")


def encode_flags(
    *,
    qr: bool = False,
    opcode: int = 0,
    aa: bool = False,
    tc: bool = False,
    rd: bool = True,
    ra: bool = False,
    rcode: int = 0,
) -> int:
    return (
        (0x8000 if qr else 0)
        | ((opcode & 0xF) << 11)
        | (0x0400 if aa else 0)
        | (0x0200 if tc else 0)
        | (0x0100 if rd else 0)
        | (0x0080 if ra else 0)
        | (rcode & 0xF)
    )


def encode_query(txid: int, qname: str, qtype: int, *, rd: bool = True) -> bytes:
    out = bytearray(_HEADER.pack(txid, encode_flags(rd=rd), 1, 0, 0, 0))
    out += encode_name(qname, None, len(out))
    out += struct.pack("!HH", qtype, CLASS_IN)
    return bytes(out)


def encode_response(
    txid: int,
    qname: str,
    qtype: int,
    answers: list[tuple[str, int, int, str]],
    *,
    rcode: int = RCODE_NOERROR,
    rd: bool = True,
    ra: bool = True,
    compress: bool = True,
) -> bytes:
    """Build a response with a single question and the given answers.

    ``answers`` entries are (owner name, rtype, ttl, value).
    """
    flags = encode_flags(qr=True, rd=rd, ra=ra, rcode=rcode)
    out = bytearray(_HEADER.pack(txid, flags, 1, len(answers), 0, 0))
    names: dict[str, int] | None = {} if compress else None
    out += encode_name(qname, names, len(out))
    out += struct.pack("!HH", qtype, CLASS_IN)
    for name, rtype, ttl, value in answers:
        out += encode_name(name, names, len(out))
        out += struct.pack("!HHI", rtype, CLASS_IN, ttl)
        rdata = _encode_rdata(rtype, value, names, len(out) + 2)
        out += struct.pack("!H", len(rdata))
        out += rdata
    return bytes(out)


def reply_with_question(
    query: bytes,
    answers: list[tuple[int, int, str]],
    *,
    rcode: int = RCODE_NOERROR,
    max_size: int = 512,
) -> bytes:
    """Synthesize a reply echoing the query's question section verbatim.

    ``answers`` entries are (rtype, ttl, value); owner is the query name,
    written as a pointer to the echoed question.  Sets TC and drops the
    answers if the reply would exceed ``max_size``.
    """
    txid, qflags, qdcount = struct.unpack_from("!HHH", query, 0)
    # locate the end of the first question to echo it byte for byte
    _, offset = decode_name(query, 12)
    offset += 4
    question = query[12:offset]
    flags = encode_flags(qr=True, rd=bool(qflags & 0x0100), ra=True, rcode=rcode)
    out = bytearray(_HEADER.pack(txid, flags, 1, len(answers), 0, 0))
    out += question
    for rtype, ttl, value in answers:
        out += struct.pack("!H", 0xC00C)  # pointer to the question name
        out += struct.pack("!HHI", rtype, CLASS_IN, ttl)
        rdata = _encode_rdata(rtype, value, None, 0)
        out += struct.pack("!H", len(rdata))
        out += rdata
    if len(out) > max_size:
        flags |= 0x0200  # TC
        out = bytearray(_HEADER.pack(txid, flags, 1, 0, 0, 0))
        out += question
    return bytes(out)


def error_response(query: bytes, rcode: int) -> bytes:
    """Best-effort error reply; falls back to a bare header for short input."""
    txid = struct.unpack_from("!H", query, 0)[0] if len(query) >= 2 else 0
    try:
        return reply_with_question(query, [], rcode=rcode)
    except (MalformedPacket, struct.error):
        flags = encode_flags(qr=True, rd=False, ra=True, rcode=rcode)
        return _HEADER.pack(txid, flags, 0, 0, 0, 0)
