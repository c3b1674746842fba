"""Domain-name normalization shared by the parser, filters, and sinkhole."""

from __future__ import annotations

# LDH plus underscore: underscores appear in real tracker hostnames
# (e.g. service discovery style names), so they are accepted.
_LABEL_CHARS = frozenset("abcdefghijklmnopqrstuvwxyz0123456789-_")

MAX_NAME_LEN = 253
MAX_LABEL_LEN = 63


def normalize_fqdn(name: str) -> str:
    """Lowercase and strip the trailing dot. Does not validate."""
    return name.strip().lower().rstrip(".")


def is_valid_fqdn(name: str, *, min_labels: int = 1) -> bool:
    """Syntactic check: label lengths, total length, charset, no empty labels.

    Expects an already-normalized name (lowercase, no trailing dot).
    """
    if not name or len(name) > MAX_NAME_LEN:
        return False
    labels = name.split(".")
    if len(labels) < min_labels:
        return False
    if labels[-1].isdigit():
        return False  # numeric TLD: that's an IP address, not a hostname
    for label in labels:
        if not label or len(label) > MAX_LABEL_LEN:
            return False
        if not set(label) <= _LABEL_CHARS:
            return False
        if label.startswith("-") or label.endswith("-"):
            return False
    return True
