"""Durable per-device telemetry: domain stats, traffic buckets, aggregations.

Backed by a single-file sqlite database (or :memory: for tests and demo
mode).  One writer and many readers are serialized through a lock on a
shared connection; every aggregation therefore sees fully applied
events.  All timestamps are integer microseconds since the Unix epoch,
which keeps JSON exports byte-stable across replays.
"""

from __future__ import annotations

import json
import sqlite3
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterator

from .engine import DnsAnswerEvent, FlowEvent, IpDomainMap, resolve_flow_domain
from .filters import DomainLabeler, Label

SCHEMA_VERSION = 1
DEFAULT_BUCKET_WIDTH_S = 5
DEFAULT_EVENT_RETENTION_US = 7 * 24 * 3600 * 1_000_000

_SCHEMA = """
CREATE TABLE IF NOT EXISTS meta(
  key TEXT PRIMARY KEY,
  value TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS devices(
  device_key TEXT PRIMARY KEY,
  display_name TEXT NOT NULL,
  first_seen_us INTEGER NOT NULL,
  last_seen_us INTEGER NOT NULL,
  addresses TEXT NOT NULL DEFAULT '[]'
);
CREATE TABLE IF NOT EXISTS domain_stats(
  device_key TEXT NOT NULL,
  fqdn TEXT NOT NULL,
  sld TEXT,
  organization TEXT NOT NULL,
  label TEXT NOT NULL,
  access_count INTEGER NOT NULL,
  last_contacted_us INTEGER NOT NULL,
  blocked INTEGER NOT NULL DEFAULT 0,
  PRIMARY KEY(device_key, fqdn)
);
CREATE TABLE IF NOT EXISTS traffic_buckets(
  device_key TEXT NOT NULL,
  window_start_us INTEGER NOT NULL,
  width_us INTEGER NOT NULL,
  outbound_bytes INTEGER NOT NULL,
  PRIMARY KEY(device_key, window_start_us)
);
CREATE TABLE IF NOT EXISTS dns_events(
  seq INTEGER PRIMARY KEY AUTOINCREMENT,
  device_key TEXT NOT NULL,
  ts_us INTEGER NOT NULL,
  qname TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_dns_events_device_ts ON dns_events(device_key, ts_us);
CREATE INDEX IF NOT EXISTS idx_domain_stats_fqdn ON domain_stats(fqdn);
"""


class UnknownDevice(KeyError):
    pass


@dataclass(frozen=True)
class DeviceRecord:
    device_key: str
    display_name: str
    first_seen_us: int
    last_seen_us: int
    addresses: tuple[str, ...]


SORT_KEYS = {
    "last_contacted": "last_contacted_us DESC, fqdn ASC",
    "access_count": "access_count DESC, fqdn ASC",
    "fqdn": "fqdn ASC",
    "blocked": "blocked DESC, fqdn ASC",
}


class TelemetryStore:
    def __init__(self, path: str = ":memory:", *, bucket_width_s: int = DEFAULT_BUCKET_WIDTH_S):
        self._conn = sqlite3.connect(path, check_same_thread=False, isolation_level=None)
        self._conn.row_factory = sqlite3.Row
        self._lock = threading.RLock()
        self.bucket_width_us = bucket_width_s * 1_000_000
        self._blocked_matcher: Callable[[str], bool] | None = None
        with self._lock:
            self._conn.executescript(_SCHEMA)
            if path != ":memory:":
                self._conn.execute("PRAGMA journal_mode=WAL")
            self._set_meta("schema_version", str(SCHEMA_VERSION))

    # -- plumbing ------------------------------------------------------------

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    @contextmanager
    def bulk(self) -> Iterator[None]:
        """Wrap many record_* calls in one transaction (replay speed)."""
        with self._lock:
            self._conn.execute("BEGIN")
            try:
                yield
            except BaseException:
                self._conn.execute("ROLLBACK")
                raise
            self._conn.execute("COMMIT")

    def _set_meta(self, key: str, value: str) -> None:
        self._conn.execute(
            "INSERT INTO meta(key, value) VALUES(?, ?) ON CONFLICT(key) DO UPDATE SET value=excluded.value",
            (key, value),
        )

    def _get_meta(self, key: str) -> str | None:
        row = self._conn.execute("SELECT value FROM meta WHERE key=?", (key,)).fetchone()
        return row["value"] if row else None

    def set_blocked_matcher(self, matcher: Callable[[str], bool] | None) -> None:
        """Install the blocklist's suffix matcher used to flag rows."""
        self._blocked_matcher = matcher

    def _is_blocked(self, fqdn: str) -> int:
        return int(self._blocked_matcher(fqdn)) if self._blocked_matcher else 0

    # -- ingestion -----------------------------------------------------------

    def touch_device(
        self, device_key: str, ts_us: int, *, display_name: str | None = None, address: str | None = None
    ) -> bool:
        """Upsert the device record; returns True when first seen."""
        with self._lock:
            row = self._conn.execute(
                "SELECT first_seen_us, last_seen_us, addresses, display_name FROM devices WHERE device_key=?",
                (device_key,),
            ).fetchone()
            if row is None:
                addresses = [address] if address else []
                self._conn.execute(
                    "INSERT INTO devices(device_key, display_name, first_seen_us, last_seen_us, addresses)"
                    " VALUES(?,?,?,?,?)",
                    (device_key, display_name or device_key, ts_us, ts_us, json.dumps(addresses)),
                )
                return True
            addresses = json.loads(row["addresses"])
            if address and address not in addresses:
                addresses = sorted(addresses + [address])
            self._conn.execute(
                "UPDATE devices SET first_seen_us=MIN(first_seen_us, ?), last_seen_us=MAX(last_seen_us, ?),"
                " addresses=?, display_name=? WHERE device_key=?",
                (
                    ts_us,
                    ts_us,
                    json.dumps(addresses),
                    display_name or row["display_name"],
                    device_key,
                ),
            )
            return False

    def _upsert_stat(self, device_key: str, fqdn: str, ts_us: int, labeler: DomainLabeler) -> dict:
        info = labeler.label(fqdn)
        blocked = self._is_blocked(fqdn)
        self._conn.execute(
            "INSERT INTO domain_stats(device_key, fqdn, sld, organization, label, access_count,"
            " last_contacted_us, blocked) VALUES(?,?,?,?,?,1,?,?)"
            " ON CONFLICT(device_key, fqdn) DO UPDATE SET"
            " access_count = access_count + 1,"
            " last_contacted_us = MAX(last_contacted_us, excluded.last_contacted_us),"
            " sld = excluded.sld, organization = excluded.organization,"
            " label = excluded.label, blocked = excluded.blocked",
            (device_key, fqdn, info.sld, info.organization, info.label.value, ts_us, blocked),
        )
        row = self._conn.execute(
            "SELECT * FROM domain_stats WHERE device_key=? AND fqdn=?", (device_key, fqdn)
        ).fetchone()
        return dict(row)

    def record_dns(self, event: DnsAnswerEvent, labeler: DomainLabeler) -> dict:
        """Count one DNS contact and remember the event for the query graph."""
        with self._lock:
            self._conn.execute(
                "INSERT INTO dns_events(device_key, ts_us, qname) VALUES(?,?,?)",
                (event.device_key, event.ts_us, event.qname),
            )
            return self._upsert_stat(event.device_key, event.qname, event.ts_us, labeler)

    def record_flow(
        self, event: FlowEvent, ip_map: IpDomainMap, labeler: DomainLabeler
    ) -> tuple[dict, dict | None]:
        """Add outbound bytes to the device's bucket; count resolved contacts.

        Returns (bucket row, stat row or None when the destination is
        unresolved).
        """
        window_start = (event.ts_us // self.bucket_width_us) * self.bucket_width_us
        with self._lock:
            self._conn.execute(
                "INSERT INTO traffic_buckets(device_key, window_start_us, width_us, outbound_bytes)"
                " VALUES(?,?,?,?) ON CONFLICT(device_key, window_start_us) DO UPDATE SET"
                " outbound_bytes = outbound_bytes + excluded.outbound_bytes",
                (event.device_key, window_start, self.bucket_width_us, event.payload_bytes),
            )
            bucket = dict(
                self._conn.execute(
                    "SELECT * FROM traffic_buckets WHERE device_key=? AND window_start_us=?",
                    (event.device_key, window_start),
                ).fetchone()
            )
            fqdn = resolve_flow_domain(event, ip_map)
            stat = None
            if fqdn is not None:
                stat = self._upsert_stat(event.device_key, fqdn, event.ts_us, labeler)
            return bucket, stat

    # -- ruleset / blocklist maintenance --------------------------------------

    def apply_ruleset(self, labeler: DomainLabeler) -> int:
        """Re-label every row under a new rule set; counts changed rows."""
        changed = 0
        with self._lock:
            fqdns = [
                r["fqdn"]
                for r in self._conn.execute("SELECT DISTINCT fqdn FROM domain_stats").fetchall()
            ]
            self._conn.execute("BEGIN")
            for fqdn in fqdns:
                info = labeler.label(fqdn)
                cursor = self._conn.execute(
                    "UPDATE domain_stats SET sld=?, organization=?, label=?"
                    " WHERE fqdn=? AND (label != ? OR organization != ? OR COALESCE(sld,'') != COALESCE(?,''))",
                    (info.sld, info.organization, info.label.value, fqdn, info.label.value, info.organization, info.sld),
                )
                changed += cursor.rowcount
            self._set_meta("ruleset_fingerprint", labeler.fingerprint)
            self._conn.execute("COMMIT")
        return changed

    def refresh_blocked(self) -> list[tuple[str, str, bool]]:
        """Recompute blocked flags after a blocklist change; returns changes."""
        changes: list[tuple[str, str, bool]] = []
        with self._lock:
            rows = self._conn.execute(
                "SELECT device_key, fqdn, blocked FROM domain_stats"
            ).fetchall()
            self._conn.execute("BEGIN")
            for row in rows:
                blocked = self._is_blocked(row["fqdn"])
                if blocked != row["blocked"]:
                    self._conn.execute(
                        "UPDATE domain_stats SET blocked=? WHERE device_key=? AND fqdn=?",
                        (blocked, row["device_key"], row["fqdn"]),
                    )
                    changes.append((row["device_key"], row["fqdn"], bool(blocked)))
            self._conn.execute("COMMIT")
        return changes

    def prune_events(self, before_us: int) -> int:
        with self._lock:
            cursor = self._conn.execute("DELETE FROM dns_events WHERE ts_us < ?", (before_us,))
            return cursor.rowcount

    # -- queries ---------------------------------------------------------------

    def devices(self) -> list[DeviceRecord]:
        with self._lock:
            rows = self._conn.execute("SELECT * FROM devices ORDER BY device_key").fetchall()
        return [
            DeviceRecord(
                device_key=r["device_key"],
                display_name=r["display_name"],
                first_seen_us=r["first_seen_us"],
                last_seen_us=r["last_seen_us"],
                addresses=tuple(json.loads(r["addresses"])),
            )
            for r in rows
        ]

    def device(self, device_key: str) -> DeviceRecord:
        for record in self.devices():
            if record.device_key == device_key:
                return record
        raise UnknownDevice(device_key)

    def _require_device(self, device_key: str) -> None:
        with self._lock:
            row = self._conn.execute(
                "SELECT 1 FROM devices WHERE device_key=?", (device_key,)
            ).fetchone()
        if row is None:
            raise UnknownDevice(device_key)

    def top_domains(self, k: int, label: Label, scope: str | None = None) -> list[tuple[str, int]]:
        """Top-k domains by summed contact count; ties break by name."""
        if k < 1:
            raise ValueError("k must be >= 1")
        query = (
            "SELECT fqdn, SUM(access_count) AS total FROM domain_stats WHERE label=?"
            + (" AND device_key=?" if scope else "")
            + " GROUP BY fqdn ORDER BY total DESC, fqdn ASC LIMIT ?"
        )
        args: tuple = (label.value, scope, k) if scope else (label.value, k)
        with self._lock:
            rows = self._conn.execute(query, args).fetchall()
        return [(r["fqdn"], r["total"]) for r in rows]

    def device_domain_pie(self, scope: str | None = None) -> list[tuple[str, int]]:
        query = (
            "SELECT device_key, SUM(access_count) AS total FROM domain_stats"
            + (" WHERE device_key=?" if scope else "")
            + " GROUP BY device_key ORDER BY device_key"
        )
        with self._lock:
            rows = self._conn.execute(query, (scope,) if scope else ()).fetchall()
        return [(r["device_key"], r["total"]) for r in rows]

    def blocked_ratio(self, device_key: str) -> tuple[int, int, int]:
        """(unblocked trackers, blocked trackers, non-trackers) for a device."""
        self._require_device(device_key)
        with self._lock:
            rows = self._conn.execute(
                "SELECT label, blocked, COUNT(*) AS n FROM domain_stats WHERE device_key=?"
                " GROUP BY label, blocked",
                (device_key,),
            ).fetchall()
        unblocked = blocked = non_trackers = 0
        for r in rows:
            if r["label"] == Label.TRACKER.value and r["blocked"]:
                blocked = r["n"]
            elif r["label"] == Label.TRACKER.value:
                unblocked = r["n"]
            else:
                non_trackers += r["n"]
        return unblocked, blocked, non_trackers

    def alluvial(self, scope: str | None = None) -> dict:
        """Layered flow graph: device -> SLD -> organization -> label.

        Edge weights are contact counts; each layer's weights sum to the
        same total.
        """
        query = "SELECT device_key, fqdn, sld, organization, label, access_count FROM domain_stats" + (
            " WHERE device_key=?" if scope else ""
        )
        with self._lock:
            rows = self._conn.execute(query, (scope,) if scope else ()).fetchall()
        device_sld: dict[tuple[str, str], int] = {}
        sld_org: dict[tuple[str, str], int] = {}
        org_label: dict[tuple[str, str], int] = {}
        for r in rows:
            sld = r["sld"] or r["fqdn"]
            count = r["access_count"]
            device_sld[(r["device_key"], sld)] = device_sld.get((r["device_key"], sld), 0) + count
            sld_org[(sld, r["organization"])] = sld_org.get((sld, r["organization"]), 0) + count
            org_label[(r["organization"], r["label"])] = (
                org_label.get((r["organization"], r["label"]), 0) + count
            )
        nodes: list[dict] = []
        seen: set[tuple[str, str]] = set()

        def add_node(layer: str, name: str) -> None:
            if (layer, name) not in seen:
                seen.add((layer, name))
                nodes.append({"layer": layer, "name": name})

        edges: list[dict] = []
        for (layers, pairs) in (
            (("device", "sld"), device_sld),
            (("sld", "organization"), sld_org),
            (("organization", "label"), org_label),
        ):
            for (src, dst), weight in sorted(pairs.items()):
                add_node(layers[0], src)
                add_node(layers[1], dst)
                edges.append(
                    {
                        "source": {"layer": layers[0], "name": src},
                        "target": {"layer": layers[1], "name": dst},
                        "weight": weight,
                    }
                )
        return {"nodes": nodes, "edges": edges}

    def dns_timeseries(
        self,
        device_key: str,
        window: tuple[int, int] | None = None,
        bucket_width_s: int | None = None,
    ) -> list[tuple[int, int]]:
        """DNS answer events per fixed-width bucket, zero-filled."""
        self._require_device(device_key)
        width_us = (bucket_width_s or self.bucket_width_us // 1_000_000) * 1_000_000
        if width_us <= 0:
            raise ValueError("bucket width must be positive")
        with self._lock:
            rows = self._conn.execute(
                "SELECT ts_us FROM dns_events WHERE device_key=?", (device_key,)
            ).fetchall()
        counts: dict[int, int] = {}
        for r in rows:
            start = (r["ts_us"] // width_us) * width_us
            counts[start] = counts.get(start, 0) + 1
        return _zero_fill(counts, width_us, window)

    def outgoing_traffic_series(
        self, scope: str | None = None, window: tuple[int, int] | None = None
    ) -> list[tuple[int, float]]:
        """Outbound kilobits per second per bucket, zero-filled."""
        query = "SELECT window_start_us, width_us, outbound_bytes FROM traffic_buckets" + (
            " WHERE device_key=?" if scope else ""
        )
        with self._lock:
            rows = self._conn.execute(query, (scope,) if scope else ()).fetchall()
        width_us = self.bucket_width_us
        totals: dict[int, int] = {}
        for r in rows:
            totals[r["window_start_us"]] = totals.get(r["window_start_us"], 0) + r["outbound_bytes"]
            width_us = r["width_us"]
        width_s = width_us / 1_000_000
        filled = _zero_fill(totals, width_us, window)
        return [(start, total * 8 / 1000 / width_s) for start, total in filled]

    def traffic_bucket_rows(self) -> list[dict]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM traffic_buckets ORDER BY device_key, window_start_us"
            ).fetchall()
        return [dict(r) for r in rows]

    def device_domain_list(
        self,
        device_key: str,
        label: Label | None = None,
        sort_key: str = "last_contacted",
    ) -> list[dict]:
        self._require_device(device_key)
        if sort_key not in SORT_KEYS:
            raise ValueError(f"unknown sort key {sort_key!r}; expected one of {sorted(SORT_KEYS)}")
        query = (
            "SELECT fqdn, sld, organization, label, access_count, last_contacted_us, blocked"
            " FROM domain_stats WHERE device_key=?"
            + (" AND label=?" if label else "")
            + f" ORDER BY {SORT_KEYS[sort_key]}"
        )
        args: tuple = (device_key, label.value) if label else (device_key,)
        with self._lock:
            rows = self._conn.execute(query, args).fetchall()
        return [dict(r, blocked=bool(r["blocked"])) for r in rows]

    def recent_domains(self, device_key: str, n: int = 3) -> list[dict]:
        rows = self.device_domain_list(device_key, sort_key="last_contacted")
        return rows[:n]

    def domain_counts(self, device_key: str) -> dict[str, int]:
        """Totals for device cards: trackers, non-trackers, blocked."""
        self._require_device(device_key)
        with self._lock:
            rows = self._conn.execute(
                "SELECT label, blocked, COUNT(*) AS n FROM domain_stats WHERE device_key=?"
                " GROUP BY label, blocked",
                (device_key,),
            ).fetchall()
        out = {"trackers": 0, "non_trackers": 0, "blocked": 0}
        for r in rows:
            if r["label"] == Label.TRACKER.value:
                out["trackers"] += r["n"]
            else:
                out["non_trackers"] += r["n"]
            if r["blocked"]:
                out["blocked"] += r["n"]
        return out

    # -- export / import --------------------------------------------------------

    def export_state(self) -> dict:
        """Full store state with stable ordering, for golden comparisons."""
        with self._lock:
            devices = [
                dict(r) for r in self._conn.execute("SELECT * FROM devices ORDER BY device_key")
            ]
            stats = [
                dict(r)
                for r in self._conn.execute(
                    "SELECT * FROM domain_stats ORDER BY device_key, fqdn"
                )
            ]
            buckets = [
                dict(r)
                for r in self._conn.execute(
                    "SELECT * FROM traffic_buckets ORDER BY device_key, window_start_us"
                )
            ]
            events = [
                dict(r)
                for r in self._conn.execute(
                    "SELECT device_key, ts_us, qname FROM dns_events"
                    " ORDER BY ts_us, device_key, qname"
                )
            ]
        for row in devices:
            row["addresses"] = json.loads(row["addresses"])
        for row in stats:
            row["blocked"] = bool(row["blocked"])
        return {
            "schema_version": SCHEMA_VERSION,
            "ruleset_fingerprint": self._get_meta("ruleset_fingerprint"),
            "devices": devices,
            "domain_stats": stats,
            "traffic_buckets": buckets,
            "dns_events": events,
        }

    def export_json(self) -> str:
        return json.dumps(self.export_state(), sort_keys=True, indent=2) + "\n"

    def import_state(self, state: dict) -> None:
        if state.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported export schema {state.get('schema_version')!r}")
        with self._lock:
            self._conn.execute("BEGIN")
            for table in ("devices", "domain_stats", "traffic_buckets", "dns_events"):
                self._conn.execute(f"DELETE FROM {table}")
            for row in state["devices"]:
                self._conn.execute(
                    "INSERT INTO devices VALUES(?,?,?,?,?)",
                    (
                        row["device_key"],
                        row["display_name"],
                        row["first_seen_us"],
                        row["last_seen_us"],
                        json.dumps(row["addresses"]),
                    ),
                )
            for row in state["domain_stats"]:
                self._conn.execute(
                    "INSERT INTO domain_stats VALUES(?,?,?,?,?,?,?,?)",
                    (
                        row["device_key"],
                        row["fqdn"],
                        row["sld"],
                        row["organization"],
                        row["label"],
                        row["access_count"],
                        row["last_contacted_us"],
                        int(row["blocked"]),
                    ),
                )
            for row in state["traffic_buckets"]:
                self._conn.execute(
                    "INSERT INTO traffic_buckets VALUES(?,?,?,?)",
                    (
                        row["device_key"],
                        row["window_start_us"],
                        row["width_us"],
                        row["outbound_bytes"],
                    ),
                )
            for row in state["dns_events"]:
                self._conn.execute(
                    "INSERT INTO dns_events(device_key, ts_us, qname) VALUES(?,?,?)",
                    (row["device_key"], row["ts_us"], row["qname"]),
                )
            if state.get("ruleset_fingerprint"):
                self._set_meta("ruleset_fingerprint", state["ruleset_fingerprint"])
            self._conn.execute("COMMIT")


def _zero_fill(
    values: dict[int, int], width_us: int, window: tuple[int, int] | None
) -> list[tuple[int, int]]:
    """Emit aligned buckets over the window (or data extent), zeros included."""
    if window is not None:
        start, end = window
        start = (start // width_us) * width_us
        end = (end // width_us) * width_us
    elif values:
        start, end = min(values), max(values)
    else:
        return []
    out = []
    current = start
    while current <= end:
        out.append((current, values.get(current, 0)))
        current += width_us
    return out
