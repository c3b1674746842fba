"""UDP DNS forwarder with a dynamically editable blocklist.

Queries for blocked names are answered locally with a null address
(0.0.0.0 / ::) and a 2 second TTL so unblocking takes effect quickly;
everything else is forwarded verbatim to the single upstream resolver.
The blocked path never touches the network.
"""

from __future__ import annotations

import os
import socket
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from . import dnswire
from .filters import suffix_match
from .names import is_valid_fqdn, normalize_fqdn

NULL_IPV4 = "0.0.0.0"
NULL_IPV6 = "::"
BLOCKED_TTL = 2
UPSTREAM_TIMEOUT_S = 2.0


class InvalidDomain(ValueError):
    pass


class Action(Enum):
    BLOCKED = "blocked"
    FORWARDED = "forwarded"
    REFUSED = "refused"


@dataclass(frozen=True)
class SinkholeDecision:
    action: Action
    qname: str
    latency_us: int
    upstream_used: str | None = None
    rcode: int = dnswire.RCODE_NOERROR


class BlockList:
    """Set of blocked FQDNs with atomic file persistence and versioning.

    Mutations are serialized and swap in a new frozenset, so concurrent
    query handlers always match against one consistent snapshot.  The
    version increments only when membership actually changes; re-blocking
    a present domain is an acknowledged no-op.
    """

    def __init__(self, path: str | None = None, *, subdomain_matching: bool = True):
        self._domains: frozenset[str] = frozenset()
        self._lock = threading.Lock()
        self._listeners: list[Callable[[str, str, int], None]] = []
        self.path = path
        self.subdomain_matching = subdomain_matching
        self.version = 0
        self.updated_at_us = 0
        if path and os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                loaded = {normalize_fqdn(line) for line in fh if line.strip()}
            self._domains = frozenset(d for d in loaded if is_valid_fqdn(d))

    @property
    def domains(self) -> frozenset[str]:
        return self._domains

    def subscribe(self, listener: Callable[[str, str, int], None]) -> None:
        """listener(action, fqdn, version), called after the change is durable."""
        self._listeners.append(listener)

    def matches(self, qname: str) -> str | None:
        return suffix_match(qname, self._domains, subdomain_matching=self.subdomain_matching)

    def block(self, fqdn: str) -> int:
        return self._mutate(fqdn, add=True)

    def unblock(self, fqdn: str) -> int:
        return self._mutate(fqdn, add=False)

    def _mutate(self, fqdn: str, *, add: bool) -> int:
        name = normalize_fqdn(fqdn)
        if not is_valid_fqdn(name, min_labels=2):
            raise InvalidDomain(f"not a valid domain: {fqdn!r}")
        notify = None
        with self._lock:
            present = name in self._domains
            if add and not present:
                self._domains = self._domains | {name}
            elif not add and present:
                self._domains = self._domains - {name}
            else:
                return self.version  # idempotent no-op
            self.version += 1
            self.updated_at_us = time.time_ns() // 1000
            self._persist()
            notify = ("block" if add else "unblock", name, self.version)
        if notify:
            for listener in self._listeners:
                listener(*notify)
        return self.version

    def _persist(self) -> None:
        if not self.path:
            return
        directory = os.path.dirname(os.path.abspath(self.path))
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".blocklist-")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                for domain in sorted(self._domains):
                    fh.write(domain + "\n")
            os.replace(tmp, self.path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


class UpstreamClient:
    """One-shot UDP exchange with the configured resolver."""

    def __init__(self, address: tuple[str, int], timeout_s: float = UPSTREAM_TIMEOUT_S):
        self.address = address
        self.timeout_s = timeout_s

    def query(self, wire: bytes) -> bytes | None:
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sock.settimeout(self.timeout_s)
        try:
            sock.sendto(wire, self.address)
            data, _ = sock.recvfrom(65535)
            return data
        except (socket.timeout, OSError):
            return None
        finally:
            sock.close()

    def describe(self) -> str:
        return f"{self.address[0]}:{self.address[1]}"


def handle_query(
    wire: bytes,
    blocklist: BlockList,
    upstream: UpstreamClient | None,
    *,
    null_blocking: bool = True,
) -> tuple[bytes, SinkholeDecision]:
    """Answer one DNS query; always returns a well-formed response."""
    start = time.perf_counter_ns()

    def latency() -> int:
        return (time.perf_counter_ns() - start) // 1000

    try:
        msg = dnswire.decode_query(wire)
    except dnswire.MalformedPacket:
        response = dnswire.error_response(wire, dnswire.RCODE_FORMERR)
        return response, SinkholeDecision(
            Action.REFUSED, "", latency(), rcode=dnswire.RCODE_FORMERR
        )
    if msg.is_response or msg.opcode != 0:
        response = dnswire.error_response(wire, dnswire.RCODE_FORMERR)
        return response, SinkholeDecision(
            Action.REFUSED, msg.questions[0].qname, latency(), rcode=dnswire.RCODE_FORMERR
        )

    question = msg.questions[0]
    qname = question.qname

    if blocklist.matches(qname) is not None:
        if not null_blocking:
            response = dnswire.reply_with_question(wire, [], rcode=dnswire.RCODE_NXDOMAIN)
            return response, SinkholeDecision(
                Action.BLOCKED, qname, latency(), rcode=dnswire.RCODE_NXDOMAIN
            )
        if question.qtype == dnswire.TYPE_A:
            answers = [(dnswire.TYPE_A, BLOCKED_TTL, NULL_IPV4)]
        elif question.qtype == dnswire.TYPE_AAAA:
            answers = [(dnswire.TYPE_AAAA, BLOCKED_TTL, NULL_IPV6)]
        else:
            answers = []  # NODATA for anything but address queries
        response = dnswire.reply_with_question(wire, answers)
        return response, SinkholeDecision(Action.BLOCKED, qname, latency())

    if upstream is None:
        response = dnswire.error_response(wire, dnswire.RCODE_SERVFAIL)
        return response, SinkholeDecision(
            Action.REFUSED, qname, latency(), rcode=dnswire.RCODE_SERVFAIL
        )
    reply = upstream.query(wire)
    if reply is None:
        response = dnswire.error_response(wire, dnswire.RCODE_SERVFAIL)
        return response, SinkholeDecision(
            Action.REFUSED, qname, latency(), upstream_used=upstream.describe(),
            rcode=dnswire.RCODE_SERVFAIL,
        )
    return reply, SinkholeDecision(
        Action.FORWARDED, qname, latency(), upstream_used=upstream.describe()
    )


class SinkholeServer:
    """Threaded UDP server; one worker per in-flight query."""

    def __init__(
        self,
        blocklist: BlockList,
        upstream: UpstreamClient | None,
        *,
        host: str = "127.0.0.1",
        port: int = 5353,
        null_blocking: bool = True,
        on_decision: Callable[[SinkholeDecision, str], None] | None = None,
        max_workers: int = 16,
    ):
        self.blocklist = blocklist
        self.upstream = upstream
        self.host = host
        self.port = port
        self.null_blocking = null_blocking
        self.on_decision = on_decision
        self._sock: socket.socket | None = None
        self._pool = ThreadPoolExecutor(max_workers=max_workers)
        self._thread: threading.Thread | None = None
        self._running = threading.Event()

    @property
    def address(self) -> tuple[str, int]:
        assert self._sock is not None, "server not started"
        return self._sock.getsockname()[:2]

    def start(self) -> None:
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((self.host, self.port))
        sock.settimeout(0.2)
        self._sock = sock
        self._running.set()
        self._thread = threading.Thread(target=self._serve, name="dns-sinkhole", daemon=True)
        self._thread.start()

    def _serve(self) -> None:
        assert self._sock is not None
        while self._running.is_set():
            try:
                wire, client = self._sock.recvfrom(4096)
            except socket.timeout:
                continue
            except OSError:
                break
            self._pool.submit(self._handle, wire, client)

    def _handle(self, wire: bytes, client: tuple[str, int]) -> None:
        response, decision = handle_query(
            wire, self.blocklist, self.upstream, null_blocking=self.null_blocking
        )
        sock = self._sock
        if sock is not None:
            try:
                sock.sendto(response, client)
            except OSError:
                pass
        if self.on_decision is not None:
            self.on_decision(decision, client[0])

    def stop(self) -> None:
        self._running.clear()
        if self._thread is not None:
            self._thread.join(timeout=2)
        if self._sock is not None:
            self._sock.close()
            self._sock = None
        self._pool.shutdown(wait=False)
