"""Acceptance gate: one test per release criterion, tolerances pinned.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the one-line
PASS/FAIL verdict per criterion.
"""

from __future__ import annotations

import ipaddress
import json
import pathlib
import random
import socket
import time

import jsonschema
from fastapi.testclient import TestClient

from gatewatch import dnswire
from gatewatch.app import build_app
from gatewatch.capture import read_pcap
from gatewatch.config import AppConfig
from gatewatch.filters import Label, classify, compile_lists, load_vendored_lists
from gatewatch.sinkhole import Action, BlockList, SinkholeServer, UpstreamClient, handle_query
from gatewatch.synth import DeviceSpec, DomainSpec, ScenarioSpec, StubResolver, generate

from .conftest import small_scenario
from .oracles import wire_builder

GOLDEN_DIR = pathlib.Path(__file__).resolve().parent / "goldens"


def _verdict(name: str, ok: bool, detail: str = "") -> None:
    line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    print(line, flush=True)
    assert ok, line


# ---------------------------------------------------------------------------


def test_acceptance_dns_parser_oracle():
    """1,000 builder round-trips with 0 mismatches; 100k fuzz inputs, 0 crashes; < 60 s."""
    started = time.perf_counter()
    rng = random.Random(0xD15EA5E)
    tokens = ["cdn", "edge", "api", "img", "telemetry", "ads", "x9", "n0de", "eu-west", "srv"]

    def random_name() -> str:
        return ".".join(rng.choice(tokens) for _ in range(rng.randrange(2, 6))) + "." + rng.choice(["com", "net", "io"])

    mismatches = 0
    for _ in range(1000):
        qname = random_name()
        compress = rng.random() < 0.5
        owner = qname
        answers = []
        for _ in range(rng.randrange(1, 6)):
            kind = rng.randrange(3)
            if kind == 0:
                answers.append((owner, wire_builder.QTYPE_A, rng.randrange(3600), str(ipaddress.IPv4Address(rng.randrange(2**32)))))
            elif kind == 1:
                answers.append((owner, wire_builder.QTYPE_AAAA, rng.randrange(3600), str(ipaddress.IPv6Address(rng.randrange(2**128)))))
            else:
                target = random_name()
                answers.append((owner, wire_builder.QTYPE_CNAME, rng.randrange(3600), target))
                owner = target
        wire = wire_builder.build_response(rng.randrange(2**16), qname, wire_builder.QTYPE_A, answers, compress=compress)
        msg = dnswire.decode_message(wire)
        expected = [
            (owner, rtype, ttl, ipaddress.IPv6Address(value).compressed if rtype == wire_builder.QTYPE_AAAA else value)
            for owner, rtype, ttl, value in answers
        ]
        got = [(r.name, r.rtype, r.ttl, r.value) for r in msg.answers]
        if msg.questions[0].qname != qname or msg.ancount != len(answers) or got != expected:
            mismatches += 1

    crashes = 0
    for _ in range(100_000):
        blob = rng.randbytes(rng.randrange(0, 120))
        try:
            dnswire.decode_message(blob)
        except dnswire.MalformedPacket:
            pass
        except Exception:
            crashes += 1
    elapsed = time.perf_counter() - started
    _verdict(
        "dns-parser-oracle",
        mismatches == 0 and crashes == 0 and elapsed < 60,
        f"mismatches={mismatches} crashes={crashes} runtime={elapsed:.1f}s",
    )


def test_acceptance_classifier_oracle():
    """10k probes vs 1k rules match a brute-force scan; monotone under 1k added rules; < 30 s."""
    started = time.perf_counter()
    rng = random.Random(0xC1A551F)
    tokens = ["track", "ads", "tm", "px", "blue", "gamma", "zero", "vec", "hive", "nest"]

    def name(depth: int) -> str:
        return ".".join(rng.choice(tokens) + str(rng.randrange(40)) for _ in range(depth)) + "." + rng.choice(["com", "net", "org", "io"])

    rules = set()
    while len(rules) < 1000:
        rules.add(name(rng.randrange(1, 3)))
    ruleset = compile_lists([("acc", "\n".join(sorted(rules)) + "\n")])
    assert len(ruleset) == 1000

    rule_list = sorted(ruleset.domains)
    probes = []
    for _ in range(10_000):
        if rng.random() < 0.5:
            probes.append((rng.choice(["", "a.", "x.y."])) + rng.choice(rule_list))
        else:
            probes.append(name(rng.randrange(1, 4)))

    def brute_force(fqdn: str) -> str | None:
        best = None
        for rule in rule_list:
            if fqdn == rule or fqdn.endswith("." + rule):
                if best is None or len(rule) > len(best):
                    best = rule
        return best

    mismatches = sum(1 for p in probes if classify(p, ruleset).matched_rule != brute_force(p))

    # monotonicity: adding rules never flips tracker -> non-tracker
    tracked = {p for p in probes[:2000] if classify(p, ruleset).label is Label.TRACKER}
    grown_rules = set(rules)
    while len(grown_rules) < 2000:
        grown_rules.add(name(rng.randrange(1, 3)))
    grown = compile_lists([("acc", "\n".join(sorted(grown_rules)) + "\n")])
    flipped = sum(1 for p in tracked if classify(p, grown).label is not Label.TRACKER)

    elapsed = time.perf_counter() - started
    _verdict(
        "classifier-oracle",
        mismatches == 0 and flipped == 0 and elapsed < 30,
        f"mismatches={mismatches} flipped={flipped} runtime={elapsed:.1f}s",
    )


def test_acceptance_sinkhole_end_to_end():
    """query/block/query/unblock/query = Forwarded/Blocked/Forwarded; visibility <= 100 ms; blocked p99 < 1 ms."""
    stub = StubResolver({"probe.example.com": "93.184.216.34"})
    stub.start()
    blocklist = BlockList()
    server = SinkholeServer(blocklist, UpstreamClient(stub.address), port=0)
    server.start()
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.settimeout(2)
    try:
        def ask() -> tuple[str, list[str]]:
            sock.sendto(wire_builder.build_query(7, "probe.example.com", wire_builder.QTYPE_A), server.address)
            data, _ = sock.recvfrom(4096)
            msg = dnswire.decode_message(data)
            values = [r.value for r in msg.answers]
            return ("blocked" if "0.0.0.0" in values else "forwarded"), values

        sequence = [ask()[0]]
        blocked_at = time.monotonic()
        blocklist.block("probe.example.com")
        outcome, values = ask()
        visibility_ms = (time.monotonic() - blocked_at) * 1000
        sequence.append(outcome)
        null_ok = values == ["0.0.0.0"]
        blocklist.unblock("probe.example.com")
        sequence.append(ask()[0])

        # blocked-path latency distribution, no network involved by contract
        lat_blocklist = BlockList()
        lat_blocklist.block("probe.example.com")
        query = wire_builder.build_query(9, "probe.example.com", wire_builder.QTYPE_A)
        latencies = []
        for _ in range(10_000):
            _, decision = handle_query(query, lat_blocklist, None)
            assert decision.action is Action.BLOCKED
            latencies.append(decision.latency_us)
        latencies.sort()
        p99_ms = latencies[int(len(latencies) * 0.99)] / 1000

        _verdict(
            "sinkhole-end-to-end",
            sequence == ["forwarded", "blocked", "forwarded"]
            and null_ok
            and visibility_ms <= 100
            and p99_ms < 1.0,
            f"sequence={'/'.join(sequence)} visibility={visibility_ms:.1f}ms blocked_p99={p99_ms:.3f}ms",
        )
    finally:
        sock.close()
        server.stop()
        stub.stop()


def _conservation_scenario() -> ScenarioSpec:
    # 5 devices x 200 domains; rates sum to exactly 10,000 contact events
    devices = tuple(
        DeviceSpec(f"iot-{i}", f"aa:11:00:00:00:{i:02x}", f"10.4.0.{10 + i}") for i in range(5)
    )
    tlds = ["com", "net", "org", "io"]
    domains = tuple(
        DomainSpec(
            fqdn=f"svc{i}.brand{i // 4}.{tlds[i % 4]}",
            is_tracker=(i % 3 == 0),
            rate_per_min=10,
        )
        for i in range(200)
    )
    return ScenarioSpec(seed=0xACC, devices=devices, domains=domains, duration_s=300)


def test_acceptance_pipeline_conservation():
    """synthesizer -> capture -> store equals the manifest exactly; < 30 s."""
    started = time.perf_counter()
    spec = _conservation_scenario()
    pcap, manifest = generate(spec)
    assert sum(d["events"] for d in manifest["domains"].values()) == 10_000

    app = build_app(AppConfig(blocklist_path=""), scenario=spec, fixture=manifest["fixture"])
    summary = app.service.replay(read_pcap(pcap))
    state = app.store.export_state()
    expected = manifest["expected"]

    checks = {
        "packets": summary["packets"] == manifest["packet_count"] and summary["drops"] == {},
        "domain_stats": state["domain_stats"] == expected["domain_stats"],
        "traffic_buckets": state["traffic_buckets"] == expected["traffic_buckets"],
        "devices": state["devices"] == expected["devices"],
        "top5_trackers": [[f, c] for f, c in app.store.top_domains(5, Label.TRACKER)] == expected["top_trackers"],
        "top5_non_trackers": [[f, c] for f, c in app.store.top_domains(5, Label.NON_TRACKER)] == expected["top_non_trackers"],
        "device_pie": [[k, v] for k, v in app.store.device_domain_pie()] == expected["device_pie"],
        "alluvial": app.store.alluvial()["edges"] == expected["alluvial_edges"],
        "dns_timeseries": all(
            [[w, c] for w, c in app.store.dns_timeseries(key)] == series
            for key, series in expected["dns_timeseries"].items()
        ),
    }
    app.stop()
    elapsed = time.perf_counter() - started
    failing = [k for k, ok in checks.items() if not ok]
    _verdict(
        "pipeline-conservation",
        not failing and elapsed < 30,
        f"events=10000 packets={summary['packets']} runtime={elapsed:.1f}s"
        + (f" failing={failing}" if failing else ""),
    )


def test_acceptance_replay_determinism():
    """Two replays of one pcap from empty stores export byte-identical JSON."""
    spec = small_scenario(seed=77)
    pcap, manifest = generate(spec)
    exports = []
    for _ in range(2):
        app = build_app(AppConfig(blocklist_path=""), scenario=spec, fixture=manifest["fixture"])
        app.service.replay(read_pcap(pcap))
        exports.append(app.store.export_json())
        app.stop()
    _verdict(
        "replay-determinism",
        exports[0] == exports[1],
        f"export_bytes={len(exports[0].encode())}",
    )


def test_acceptance_api_golden_suite(api_schema):
    """Every endpoint validates against the shipped schema and matches goldens;
    read-your-writes over 100 randomized block/unblock mutations."""
    from .test_api import GOLDEN_BY_ENDPOINT, SCHEMA_BY_ENDPOINT, _validator

    spec = small_scenario()
    pcap, manifest = generate(spec)
    app = build_app(AppConfig(blocklist_path=""), scenario=spec, fixture=manifest["fixture"])
    app.service.replay(read_pcap(pcap))
    client = TestClient(app.fastapi_app())

    schema_failures = []
    golden_failures = []
    for endpoint, schema_name in SCHEMA_BY_ENDPOINT.items():
        payload = client.get(endpoint).json()
        try:
            _validator(api_schema, schema_name).validate(payload)
        except jsonschema.ValidationError as exc:
            schema_failures.append(f"{endpoint}: {exc.message}")
        golden = json.loads((GOLDEN_DIR / GOLDEN_BY_ENDPOINT[endpoint]).read_text())
        if payload != golden:
            golden_failures.append(endpoint)

    rng = random.Random(1001)
    domains = [row["fqdn"] for row in client.get("/api/devices/plug-1/domains").json()["data"]]
    blocked: set[str] = set()
    ryw_violations = 0
    for _ in range(100):
        domain = rng.choice(domains)
        if domain in blocked and rng.random() < 0.5:
            client.post("/api/unblock", json={"domain": domain})
            blocked.discard(domain)
        else:
            client.post("/api/block", json={"domain": domain})
            blocked.add(domain)
        status = set(client.get("/api/status").json()["data"]["blocked_domains"])
        rows = client.get("/api/devices/plug-1/domains").json()["data"]
        flags_ok = all(row["blocked"] == (row["fqdn"] in blocked) for row in rows)
        if status != blocked or not flags_ok or app.blocklist.domains != blocked:
            ryw_violations += 1
    app.stop()
    _verdict(
        "api-golden-suite",
        not schema_failures and not golden_failures and ryw_violations == 0,
        f"schema_failures={len(schema_failures)} golden_failures={golden_failures or 0}"
        f" ryw_violations={ryw_violations}",
    )


def test_acceptance_real_filterlist_smoke():
    """Vendored tracking lists compile to >100k unique domains and classify the probe set."""
    from importlib import resources

    lists = load_vendored_lists()
    ruleset = compile_lists(lists)
    probes = json.loads(
        resources.files("gatewatch.data").joinpath("probe_set.json").read_text("utf-8")
    )
    tracker_misses = [
        fqdn for fqdn in probes["trackers"] if classify(fqdn, ruleset).label is not Label.TRACKER
    ]
    non_tracker_hits = [
        fqdn for fqdn in probes["non_trackers"] if classify(fqdn, ruleset).label is Label.TRACKER
    ]
    _verdict(
        "real-filterlist-smoke",
        len(lists) == 10
        and len(ruleset) > 100_000
        and len(probes["trackers"]) == 20
        and not tracker_misses
        and not non_tracker_hits,
        f"lists={len(lists)} unique_domains={len(ruleset)}"
        f" tracker_misses={tracker_misses or 0} non_tracker_hits={non_tracker_hits or 0}",
    )
