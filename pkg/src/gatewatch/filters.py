"""Tracking filter lists: parsing, compilation, and domain classification.

Lists are hosts-format ("0.0.0.0 domain" / "127.0.0.1 domain") or bare
domains, one per line.  Compilation merges any number of lists into one
immutable rule set with per-domain provenance; classification matches a
domain and all of its parent domains against the set, so a rule for
``tracker.example`` also labels ``cdn.tracker.example``.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Iterable, Sequence

from .names import is_valid_fqdn, normalize_fqdn

# hosts-file noise that never belongs in a rule set
_HOSTS_NOISE = frozenset(
    {
        "localhost",
        "localhost.localdomain",
        "local",
        "broadcasthost",
        "ip6-localhost",
        "ip6-loopback",
        "ip6-localnet",
        "ip6-mcastprefix",
        "ip6-allnodes",
        "ip6-allrouters",
        "ip6-allhosts",
        "0.0.0.0",
    }
)

_SINK_ADDRESSES = ("0.0.0.0", "127.0.0.1")


class EmptyRuleSetWarning(UserWarning):
    pass


class Label(Enum):
    TRACKER = "tracker"
    NON_TRACKER = "non_tracker"


@dataclass(frozen=True)
class Classification:
    label: Label
    matched_rule: str | None = None
    sources: tuple[str, ...] = ()


@dataclass(frozen=True)
class SourceMeta:
    list_name: str
    location: str
    entry_count: int
    fetched_at: str


@dataclass(frozen=True)
class FilterRuleSet:
    domains: frozenset[str]
    provenance: dict[str, tuple[str, ...]]
    source_meta: tuple[SourceMeta, ...]
    subdomain_matching: bool = True

    @property
    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for domain in sorted(self.domains):
            digest.update(domain.encode())
            digest.update(b"\n")
        digest.update(b"suffix" if self.subdomain_matching else b"exact")
        return digest.hexdigest()[:16]

    def __len__(self) -> int:
        return len(self.domains)


def parse_hosts_list(text: str, list_name: str) -> tuple[set[str], list[str]]:
    """Parse one hosts-format list; invalid entries warn, never fail."""
    domains: set[str] = set()
    warnings_out: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) == 1:
            candidate = parts[0]
        elif len(parts) == 2 and parts[0] in _SINK_ADDRESSES:
            candidate = parts[1]
        else:
            warnings_out.append(f"{list_name}:{lineno}: unrecognized entry {raw.strip()!r}")
            continue
        domain = normalize_fqdn(candidate)
        if domain in _HOSTS_NOISE:
            continue
        if not is_valid_fqdn(domain):
            warnings_out.append(f"{list_name}:{lineno}: invalid domain {candidate!r}")
            continue
        domains.add(domain)
    return domains, warnings_out


def compile_lists(
    lists: Sequence[tuple[str, str]],
    *,
    locations: dict[str, str] | None = None,
    fetched_at: str = "",
    subdomain_matching: bool = True,
) -> FilterRuleSet:
    """Merge (list_name, text) pairs into one rule set.

    Output is independent of list order: domains are a set and each
    domain's provenance is sorted by list name.
    """
    if not lists:
        raise ValueError("compile_lists needs at least one list")
    provenance: dict[str, set[str]] = {}
    meta: list[SourceMeta] = []
    for list_name, text in lists:
        parsed, _ = parse_hosts_list(text, list_name)
        for domain in parsed:
            provenance.setdefault(domain, set()).add(list_name)
        location = (locations or {}).get(list_name, "")
        meta.append(SourceMeta(list_name, location, len(parsed), fetched_at))
    domains = frozenset(provenance)
    if not domains:
        warnings.warn("compiled rule set is empty; everything classifies as non-tracker", EmptyRuleSetWarning)
    return FilterRuleSet(
        domains=domains,
        provenance={d: tuple(sorted(srcs)) for d, srcs in provenance.items()},
        source_meta=tuple(sorted(meta, key=lambda m: m.list_name)),
        subdomain_matching=subdomain_matching,
    )


def suffix_match(fqdn: str, domains: frozenset[str] | set[str], *, subdomain_matching: bool = True) -> str | None:
    """Longest rule matching ``fqdn`` exactly or as a parent domain."""
    if subdomain_matching:
        labels = fqdn.split(".")
        for i in range(len(labels)):
            candidate = ".".join(labels[i:])
            if candidate in domains:
                return candidate
    elif fqdn in domains:
        return fqdn
    return None


def classify(fqdn: str, ruleset: FilterRuleSet) -> Classification:
    name = normalize_fqdn(fqdn)
    rule = suffix_match(name, ruleset.domains, subdomain_matching=ruleset.subdomain_matching)
    if rule is None:
        return Classification(Label.NON_TRACKER)
    return Classification(Label.TRACKER, matched_rule=rule, sources=ruleset.provenance.get(rule, ()))


class OrgTable:
    """SLD -> organization lookup from two-column tab-separated text."""

    UNKNOWN = "Unknown"

    def __init__(self, entries: dict[str, str]):
        self.entries = dict(entries)

    @classmethod
    def parse(cls, text: str) -> "OrgTable":
        entries: dict[str, str] = {}
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            sld, _, org = line.partition("\t")
            sld = normalize_fqdn(sld)
            org = org.strip()
            if sld and org and is_valid_fqdn(sld):
                entries[sld] = org
        return cls(entries)

    def organization_of(self, sld: str | None) -> str:
        if not sld:
            return self.UNKNOWN
        return self.entries.get(sld, self.UNKNOWN)


@dataclass(frozen=True)
class LabelInfo:
    label: Label
    matched_rule: str | None
    sources: tuple[str, ...]
    sld: str | None
    organization: str


@dataclass
class DomainLabeler:
    """One-stop labeling used by the telemetry store: class, SLD, org."""

    ruleset: FilterRuleSet
    psl_table: "object"
    orgs: OrgTable
    _cache: dict[str, LabelInfo] = field(default_factory=dict)

    @property
    def fingerprint(self) -> str:
        return self.ruleset.fingerprint

    def label(self, fqdn: str) -> LabelInfo:
        info = self._cache.get(fqdn)
        if info is None:
            from .psl import extract_sld

            cls = classify(fqdn, self.ruleset)
            sld = extract_sld(fqdn, self.psl_table)
            info = LabelInfo(
                label=cls.label,
                matched_rule=cls.matched_rule,
                sources=cls.sources,
                sld=sld,
                organization=self.orgs.organization_of(sld),
            )
            self._cache[fqdn] = info
        return info


def load_bundled_org_table() -> OrgTable:
    text = resources.files("gatewatch.data").joinpath("organizations.tsv").read_text("utf-8")
    return OrgTable.parse(text)


def load_vendored_lists(names: Iterable[str] | None = None) -> list[tuple[str, str]]:
    """Read the vendored filter-list snapshot shipped with the package."""
    base = resources.files("gatewatch.data").joinpath("filterlists")
    out = []
    for entry in sorted(base.iterdir(), key=lambda e: e.name):
        if not entry.name.endswith(".txt"):
            continue
        list_name = entry.name[: -len(".txt")]
        if names is not None and list_name not in names:
            continue
        out.append((list_name, entry.read_text("utf-8")))
    return out
