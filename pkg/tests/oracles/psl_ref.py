"""Reference implementation of public-suffix matching, used as an oracle.

Transliterates the published algorithm as a brute-force scan over the
raw rule list: collect every matching rule, prefer the exception rule,
otherwise the rule with the most labels, otherwise "*"; the registrable
domain is the public suffix plus one more label.  No indexing, no
sharing with the package implementation.
"""

from __future__ import annotations


def parse_rules(text: str) -> list[str]:
    rules = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("//"):
            continue
        rules.append(line.split()[0].lower())
    return rules


def _rule_matches(rule: str, labels: list[str]) -> bool:
    rule_labels = rule.lstrip("!").split(".")
    if len(rule_labels) > len(labels):
        return False
    for rule_label, label in zip(reversed(rule_labels), reversed(labels)):
        if rule_label != "*" and rule_label != label:
            return False
    return True


def ref_registrable_domain(name: str, rules: list[str]) -> str | None:
    labels = name.lower().rstrip(".").split(".")
    matching = [rule for rule in rules if _rule_matches(rule, labels)]
    exceptions = [rule for rule in matching if rule.startswith("!")]
    if exceptions:
        prevailing = exceptions[0].lstrip("!").split(".")
        # an exception rule's public suffix drops its leftmost label
        suffix_labels = prevailing[1:]
    elif matching:
        prevailing = max(matching, key=lambda rule: len(rule.split(".")))
        suffix_labels = prevailing.split(".")
    else:
        suffix_labels = ["*"]
    n = len(suffix_labels)
    if len(labels) <= n:
        return None
    return ".".join(labels[-(n + 1):])
