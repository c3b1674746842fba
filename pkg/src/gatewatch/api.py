"""HTTP API: telemetry queries, block/unblock mutations, live event stream.

Every response is wrapped in the same envelope: ``{"status": "ok",
"data": ...}`` or ``{"status": "error", "error": {code, message}}``.
The event stream is a long-lived server-sent-events response; on
connect the client gets a resync marker carrying the current blocklist
version, then ordered push events.
"""

from __future__ import annotations

import json
import queue
from dataclasses import dataclass

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel

from .engine import PacketEngine
from .filters import DomainLabeler, Label
from .service import EventBus
from .sinkhole import BlockList, InvalidDomain
from .store import SORT_KEYS, TelemetryStore, UnknownDevice

API_PREFIX = "/api"
TOP_N = 5

_LABEL_PARAMS = {"tracker": Label.TRACKER, "non_tracker": Label.NON_TRACKER}


@dataclass
class ApiContext:
    store: TelemetryStore
    blocklist: BlockList
    labeler: DomainLabeler
    bus: EventBus
    engine: PacketEngine | None = None
    keepalive_s: float = 15.0


class DomainBody(BaseModel):
    domain: str


def ok(data) -> JSONResponse:
    return JSONResponse({"status": "ok", "data": data})


def error(code: str, message: str, status_code: int) -> JSONResponse:
    return JSONResponse(
        {"status": "error", "error": {"code": code, "message": message}},
        status_code=status_code,
    )


def _device_summary(ctx: ApiContext, record) -> dict:
    counts = ctx.store.domain_counts(record.device_key)
    return {
        "device_key": record.device_key,
        "display_name": record.display_name,
        "first_seen_us": record.first_seen_us,
        "last_seen_us": record.last_seen_us,
        "addresses": list(record.addresses),
        "tracker_domains": counts["trackers"],
        "non_tracker_domains": counts["non_trackers"],
        "blocked_domains": counts["blocked"],
        "recent": ctx.store.recent_domains(record.device_key, 3),
    }


def create_app(ctx: ApiContext) -> FastAPI:
    app = FastAPI(title="gatewatch", docs_url=None, redoc_url=None)
    app.state.ctx = ctx

    @app.get(API_PREFIX + "/devices")
    def list_devices():
        return ok([_device_summary(ctx, record) for record in ctx.store.devices()])

    @app.get(API_PREFIX + "/devices/{device_key}/domains")
    def device_domains(device_key: str, label: str = "", sort: str = "last_contacted"):
        label_filter = None
        if label:
            if label not in _LABEL_PARAMS:
                return error("bad_label", f"label must be one of {sorted(_LABEL_PARAMS)}", 400)
            label_filter = _LABEL_PARAMS[label]
        if sort not in SORT_KEYS:
            return error("bad_sort", f"sort must be one of {sorted(SORT_KEYS)}", 400)
        try:
            rows = ctx.store.device_domain_list(device_key, label_filter, sort)
        except UnknownDevice:
            return error("unknown_device", f"no such device: {device_key}", 404)
        return ok(rows)

    @app.get(API_PREFIX + "/devices/{device_key}/overview")
    def device_overview(device_key: str):
        try:
            record = ctx.store.device(device_key)
            unblocked, blocked, non_trackers = ctx.store.blocked_ratio(device_key)
            series = ctx.store.dns_timeseries(device_key)
            alluvial = ctx.store.alluvial(scope=device_key)
        except UnknownDevice:
            return error("unknown_device", f"no such device: {device_key}", 404)
        return ok(
            {
                "device": _device_summary(ctx, record),
                "blocked_ratio": {
                    "unblocked_trackers": unblocked,
                    "blocked_trackers": blocked,
                    "non_trackers": non_trackers,
                },
                "dns_timeseries": [[start, count] for start, count in series],
                "alluvial": alluvial,
            }
        )

    @app.get(API_PREFIX + "/dashboard")
    def dashboard():
        series = ctx.store.outgoing_traffic_series()
        return ok(
            {
                "outgoing_series": [[start, kbps] for start, kbps in series],
                "top_trackers": [
                    [fqdn, count] for fqdn, count in ctx.store.top_domains(TOP_N, Label.TRACKER)
                ],
                "top_non_trackers": [
                    [fqdn, count]
                    for fqdn, count in ctx.store.top_domains(TOP_N, Label.NON_TRACKER)
                ],
                "per_device_pie": [
                    [device_key, total] for device_key, total in ctx.store.device_domain_pie()
                ],
                "alluvial": ctx.store.alluvial(),
            }
        )

    @app.get(API_PREFIX + "/status")
    def status():
        counters = ctx.engine.counters if ctx.engine is not None else None
        return ok(
            {
                "blocklist_version": ctx.blocklist.version,
                "blocked_domains": sorted(ctx.blocklist.domains),
                "packets": counters.packets if counters else 0,
                "events": counters.events if counters else 0,
                "drops": dict(sorted(counters.drops.items())) if counters else {},
            }
        )

    def _mutate(body: DomainBody, *, block: bool):
        try:
            version = ctx.blocklist.block(body.domain) if block else ctx.blocklist.unblock(body.domain)
        except InvalidDomain as exc:
            return error("invalid_domain", str(exc), 400)
        changes = ctx.store.refresh_blocked()
        ctx.bus.publish(
            "block_changed",
            {
                "domain": body.domain.strip().lower().rstrip("."),
                "action": "block" if block else "unblock",
                "version": version,
                "changes": [
                    {"device_key": device_key, "fqdn": fqdn, "blocked": blocked}
                    for device_key, fqdn, blocked in changes
                ],
            },
        )
        return ok({"version": version})

    @app.post(API_PREFIX + "/block")
    def block(body: DomainBody):
        return _mutate(body, block=True)

    @app.post(API_PREFIX + "/unblock")
    def unblock(body: DomainBody):
        return _mutate(body, block=False)

    @app.get(API_PREFIX + "/events")
    def events(request: Request):
        sub = ctx.bus.subscribe()

        def stream():
            try:
                resync = {
                    "kind": "resync",
                    "seq": ctx.bus.seq,
                    "payload": {"blocklist_version": ctx.blocklist.version},
                }
                yield _sse(resync)
                while not sub.dead:
                    try:
                        event = sub.queue.get(timeout=ctx.keepalive_s)
                    except queue.Empty:
                        yield ": keepalive\n\n"
                        continue
                    yield _sse(event)
            finally:
                sub.close()

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app


def _sse(event: dict) -> str:
    return f"id: {event['seq']}\ndata: {json.dumps(event, sort_keys=True)}\n\n"
