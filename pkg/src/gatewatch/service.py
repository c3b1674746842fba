"""Ingestion pipeline: capture frames in, store rows and push events out."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .capture import FrameDecodeError, decode_frame
from .engine import DnsAnswerEvent, FlowEvent, PacketEngine
from .filters import DomainLabeler
from .store import TelemetryStore


@dataclass
class EventBus:
    """Fan-out of push events to per-subscriber bounded queues.

    Publishing never blocks ingestion; a subscriber whose queue is full
    is marked dead and will be disconnected by its stream handler.
    """

    max_queue: int = 512
    _lock: threading.Lock = field(default_factory=threading.Lock)
    _subscribers: dict[int, "_Subscriber"] = field(default_factory=dict)
    _next_id: int = 0
    _seq: int = 0

    def subscribe(self) -> "_Subscriber":
        import queue

        with self._lock:
            sub = _Subscriber(self._next_id, queue.Queue(maxsize=self.max_queue), self)
            self._subscribers[sub.sub_id] = sub
            self._next_id += 1
        return sub

    def unsubscribe(self, sub_id: int) -> None:
        with self._lock:
            self._subscribers.pop(sub_id, None)

    def publish(self, kind: str, payload: dict) -> int:
        import queue

        with self._lock:
            self._seq += 1
            seq = self._seq
            event = {"kind": kind, "seq": seq, "payload": payload}
            for sub in list(self._subscribers.values()):
                try:
                    sub.queue.put_nowait(event)
                except queue.Full:
                    sub.dead = True
        return seq

    @property
    def seq(self) -> int:
        return self._seq


@dataclass
class _Subscriber:
    sub_id: int
    queue: "object"
    bus: EventBus
    dead: bool = False

    def close(self) -> None:
        self.bus.unsubscribe(self.sub_id)


class IngestService:
    """Feeds decoded packets through the engine into the telemetry store."""

    def __init__(
        self,
        engine: PacketEngine,
        store: TelemetryStore,
        labeler: DomainLabeler,
        bus: EventBus | None = None,
    ):
        self.engine = engine
        self.store = store
        self.labeler = labeler
        self.bus = bus
        self._lock = threading.Lock()

    def _publish(self, kind: str, payload: dict) -> None:
        if self.bus is not None:
            self.bus.publish(kind, payload)

    def ingest_frame(self, ts_sec: int, ts_nsec: int, frame: bytes) -> int:
        """Decode and apply one captured frame; returns events applied."""
        with self._lock:
            try:
                meta = decode_frame(ts_sec, ts_nsec, frame)
            except FrameDecodeError as exc:
                self.engine.counters.packets += 1
                self.engine.counters.drop(exc.reason)
                return 0
            events = self.engine.ingest(meta)
            for event in events:
                if isinstance(event, DnsAnswerEvent):
                    new_device = self.store.touch_device(
                        event.device_key,
                        event.ts_us,
                        display_name=self.engine.registry.display_names.get(event.device_key),
                        address=meta.dst_ip,
                    )
                    row = self.store.record_dns(event, self.labeler)
                    if new_device:
                        self._publish("device_seen", {"device_key": event.device_key})
                    self._publish(
                        "domain_contacted",
                        {
                            "device_key": event.device_key,
                            "fqdn": event.qname,
                            "label": row["label"],
                            "access_count": row["access_count"],
                            "last_contacted_us": row["last_contacted_us"],
                            "blocked": bool(row["blocked"]),
                        },
                    )
                elif isinstance(event, FlowEvent):
                    new_device = self.store.touch_device(
                        event.device_key,
                        event.ts_us,
                        display_name=self.engine.registry.display_names.get(event.device_key),
                        address=meta.src_ip,
                    )
                    bucket, stat = self.store.record_flow(event, self.engine.ip_map, self.labeler)
                    if new_device:
                        self._publish("device_seen", {"device_key": event.device_key})
                    self._publish(
                        "traffic_sample",
                        {
                            "device_key": event.device_key,
                            "window_start_us": bucket["window_start_us"],
                            "outbound_bytes": bucket["outbound_bytes"],
                        },
                    )
                    if stat is not None:
                        self._publish(
                            "domain_contacted",
                            {
                                "device_key": event.device_key,
                                "fqdn": stat["fqdn"],
                                "label": stat["label"],
                                "access_count": stat["access_count"],
                                "last_contacted_us": stat["last_contacted_us"],
                                "blocked": bool(stat["blocked"]),
                            },
                        )
            return len(events)

    def replay(self, frames: Iterable[tuple[int, int, bytes]]) -> dict:
        """Ingest a frame stream in one transaction; returns counters."""
        with self.store.bulk():
            for ts_sec, ts_nsec, frame in frames:
                self.ingest_frame(ts_sec, ts_nsec, frame)
        counters = self.engine.counters
        return {
            "packets": counters.packets,
            "events": counters.events,
            "drops": dict(sorted(counters.drops.items())),
        }

    def frame_sink(self) -> Callable[[int, int, bytes], None]:
        def sink(ts_sec: int, ts_nsec: int, frame: bytes) -> None:
            self.ingest_frame(ts_sec, ts_nsec, frame)

        return sink
