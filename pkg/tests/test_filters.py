"""Hosts-list parsing, rule-set compilation, and suffix classification."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gatewatch.filters import (
    Classification,
    EmptyRuleSetWarning,
    Label,
    OrgTable,
    classify,
    compile_lists,
    load_bundled_org_table,
    parse_hosts_list,
    suffix_match,
)


def test_basic_hosts_forms():
    text = "0.0.0.0 ads.example.com\n# comment\n127.0.0.1 track.example.net\nbare.example.org\n"
    domains, warnings = parse_hosts_list(text, "t")
    assert domains == {"ads.example.com", "track.example.net", "bare.example.org"}
    assert warnings == []


def test_empty_input_parses_to_empty_set():
    domains, warnings = parse_hosts_list("", "t")
    assert domains == set()
    assert warnings == []


def test_trailing_comments_case_and_dots():
    domains, _ = parse_hosts_list("0.0.0.0 ADS.Example.COM.  # sdk\n", "t")
    assert domains == {"ads.example.com"}


def test_hosts_noise_is_ignored_silently():
    domains, warnings = parse_hosts_list("127.0.0.1 localhost\n::1 localhost\n0.0.0.0 0.0.0.0\n", "t")
    assert domains == set()
    assert warnings == [
        "t:2: unrecognized entry '::1 localhost'",
    ]


def test_ten_thousand_line_list_with_known_composition():
    # 9,480 unique + 500 duplicate + 20 malformed lines = 10,000 lines
    rng = random.Random(99)
    unique = [f"d{i}.list-fixture.com" for i in range(9480)]
    lines = []
    for i, domain in enumerate(unique):
        form = i % 3
        if form == 0:
            lines.append(f"0.0.0.0 {domain}")
        elif form == 1:
            lines.append(f"127.0.0.1 {domain}")
        else:
            lines.append(domain)
    lines.extend(f"0.0.0.0 {rng.choice(unique[:1000])}" for _ in range(500))
    malformed = [
        "0.0.0.0 two hosts",
        "10.0.0.1 sink.example.com",
        "=bad=",
        "a..b",
        "-leadinghyphen.example.com",
        "trailinghyphen-.example.com",
        f"{'x' * 64}.example.com",
        "0.0.0.0 bad domain extra",
        "exa mple.com extra",
        "1.2.3.4",
    ]
    lines.extend(malformed * 2)
    assert len(lines) == 10_000
    rng.shuffle(lines)
    domains, warnings = parse_hosts_list("\n".join(lines), "big")
    assert len(domains) == 9_480
    assert len(warnings) == 20


def test_compile_merges_provenance_sorted():
    ruleset = compile_lists([("listB", "t.example\n"), ("listA", "0.0.0.0 t.example\n")])
    assert ruleset.provenance["t.example"] == ("listA", "listB")
    assert len(ruleset) == 1


def test_compile_disjoint_sizes_add():
    ruleset = compile_lists([("a", "x1.com\nx2.com\nx3.com\n"), ("b", "y1.com\ny2.com\ny3.com\ny4.com\n")])
    assert len(ruleset) == 7


def test_compile_requires_at_least_one_list():
    with pytest.raises(ValueError):
        compile_lists([])


def test_empty_union_warns_but_is_usable():
    with pytest.warns(EmptyRuleSetWarning):
        ruleset = compile_lists([("empty", "# nothing\n")])
    assert classify("anything.example.com", ruleset) == Classification(Label.NON_TRACKER)


@settings(max_examples=60, deadline=None)
@given(st.permutations(list(range(5))), st.data())
def test_compile_is_order_independent(order, data):
    base = [
        (f"list{i}", "\n".join(f"d{j}.perm{i % 3}.net" for j in range(i + 1)) + "\n")
        for i in range(5)
    ]
    shuffled = [base[i] for i in order]
    a = compile_lists(base)
    b = compile_lists(shuffled)
    assert a.domains == b.domains
    assert a.provenance == b.provenance
    assert a.fingerprint == b.fingerprint


def test_classify_subdomain_matches_parent_rule():
    ruleset = compile_lists([("l", "t.example\n")])
    got = classify("a.b.t.example", ruleset)
    assert got.label is Label.TRACKER
    assert got.matched_rule == "t.example"
    assert got.sources == ("l",)


def test_classify_prefers_longest_matching_rule():
    ruleset = compile_lists([("l", "example\nsub.t.example\nt.example\n")])
    assert classify("x.sub.t.example", ruleset).matched_rule == "sub.t.example"


def test_classify_without_match_is_non_tracker():
    ruleset = compile_lists([("l", "tracker.example\n")])
    got = classify("amazonalexa.com", ruleset)
    assert got.label is Label.NON_TRACKER
    assert got.matched_rule is None
    assert got.sources == ()


def test_exact_match_mode_ignores_subdomains():
    ruleset = compile_lists([("l", "t.example\n")], subdomain_matching=False)
    assert classify("a.t.example", ruleset).label is Label.NON_TRACKER
    assert classify("t.example", ruleset).label is Label.TRACKER


def _brute_force_match(fqdn: str, rules: set[str]) -> str | None:
    """Scan every rule; a rule matches exactly or as a dot-boundary suffix."""
    best = None
    for rule in rules:
        if fqdn == rule or fqdn.endswith("." + rule):
            if best is None or len(rule) > len(best):
                best = rule
    return best


def test_classifier_agrees_with_brute_force_scan():
    rng = random.Random(4242)
    tokens = ["alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta"]
    tlds = ["com", "net", "org", "io"]

    def random_name(max_labels: int) -> str:
        labels = [rng.choice(tokens) + str(rng.randrange(30)) for _ in range(rng.randrange(1, max_labels))]
        return ".".join(labels + [rng.choice(tlds)])

    rules = {random_name(3) for _ in range(1000)}
    ruleset = compile_lists([("rnd", "\n".join(sorted(rules)) + "\n")])
    # bias the probes toward the rule set so matches actually occur
    probes = []
    rule_list = sorted(ruleset.domains)
    for _ in range(10_000):
        if rng.random() < 0.5:
            base = rng.choice(rule_list)
            prefix = rng.choice(["", "x.", "a.b.", "deep.er."])
            probes.append(prefix + base)
        else:
            probes.append(random_name(5))
    mismatches = 0
    for probe in probes:
        expected = _brute_force_match(probe, ruleset.domains)
        got = classify(probe, ruleset)
        if got.matched_rule != expected:
            mismatches += 1
    assert mismatches == 0


@settings(max_examples=100, deadline=None)
@given(
    st.sets(st.sampled_from([f"r{i}.mono.net" for i in range(40)]), min_size=1, max_size=10),
    st.sets(st.sampled_from([f"extra{i}.mono.org" for i in range(40)]), max_size=10),
    st.sampled_from([f"probe{i}.r{i % 40}.mono.net" for i in range(40)]),
)
def test_adding_rules_never_untracks(base_rules, extra_rules, probe):
    small = compile_lists([("base", "\n".join(base_rules) + "\n")])
    grown = compile_lists([("base", "\n".join(base_rules | extra_rules) + "\n")])
    if classify(probe, small).label is Label.TRACKER:
        assert classify(probe, grown).label is Label.TRACKER


def test_compile_is_idempotent_over_its_own_output():
    ruleset = compile_lists([("a", "x.example\ny.example\n"), ("b", "y.example\nz.example\n")])
    reserialized = "\n".join(sorted(ruleset.domains)) + "\n"
    again = compile_lists([("merged", reserialized)])
    assert again.domains == ruleset.domains


def test_classify_is_pure():
    ruleset = compile_lists([("l", "t.example\n")])
    assert classify("a.t.example", ruleset) == classify("a.t.example", ruleset)


def test_suffix_match_helper_handles_exact_mode():
    domains = frozenset({"t.example"})
    assert suffix_match("a.t.example", domains, subdomain_matching=True) == "t.example"
    assert suffix_match("a.t.example", domains, subdomain_matching=False) is None
    assert suffix_match("t.example", domains, subdomain_matching=False) == "t.example"


# ---------------------------------------------------------------------------
# organization table


def test_org_lookup_and_default():
    table = OrgTable.parse("doubleclick.net\tGoogle\n# comment\nsamba.tv\tSamba TV\n")
    assert table.organization_of("doubleclick.net") == "Google"
    assert table.organization_of("nobody.example") == "Unknown"
    assert table.organization_of(None) == "Unknown"


def test_bundled_org_table_is_self_consistent():
    table = load_bundled_org_table()
    assert len(table.entries) > 50
    for sld, org in table.entries.items():
        assert org.strip(), f"empty organization for {sld}"
        assert table.organization_of(sld) == org
