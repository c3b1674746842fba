"""Public-suffix rules and registrable-domain (SLD) extraction.

Implements the standard Public Suffix List matching algorithm: the
prevailing rule is the matching exception rule if any, otherwise the
matching rule with the most labels, otherwise the implicit "*" rule.
The registrable domain is the public suffix plus one preceding label.
"""

from __future__ import annotations

from importlib import resources

from .names import is_valid_fqdn, normalize_fqdn


class PslParseError(ValueError):
    pass


class PublicSuffixTable:
    def __init__(self, normal: set[str], wildcard: set[str], exception: set[str]):
        self.normal = frozenset(normal)
        self.wildcard = frozenset(wildcard)  # stored without the "*." prefix
        self.exception = frozenset(exception)

    @classmethod
    def parse(cls, text: str) -> "PublicSuffixTable":
        normal: set[str] = set()
        wildcard: set[str] = set()
        exception: set[str] = set()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("//"):
                continue
            line = line.split()[0].lower()
            if line.startswith("!"):
                rule = line[1:]
                if not is_valid_fqdn(rule, min_labels=2):
                    raise PslParseError(f"line {lineno}: bad exception rule {raw!r}")
                exception.add(rule)
            elif line.startswith("*."):
                rule = line[2:]
                if not is_valid_fqdn(rule):
                    raise PslParseError(f"line {lineno}: bad wildcard rule {raw!r}")
                wildcard.add(rule)
            else:
                if not is_valid_fqdn(line):
                    raise PslParseError(f"line {lineno}: bad rule {raw!r}")
                normal.add(line)
        for rule in exception:
            # an exception must carve a hole in some wildcard rule
            rest = rule.split(".", 1)[1] if "." in rule else ""
            if rest not in wildcard:
                raise PslParseError(f"exception rule {rule!r} has no covering wildcard rule")
        return cls(normal, wildcard, exception)

    def public_suffix(self, name: str) -> str:
        """Longest matching public suffix of ``name`` (assumed normalized)."""
        labels = name.split(".")
        best = labels[-1]  # implicit "*" rule
        best_len = 1
        for i in range(len(labels)):
            candidate = ".".join(labels[i:])
            n = len(labels) - i
            if candidate in self.exception:
                # exception prevails: suffix is the rule minus its first label
                return candidate.split(".", 1)[1]
            if candidate in self.normal and n > best_len:
                best, best_len = candidate, n
            if i > 0 and ".".join(labels[i:]) in self.wildcard:
                # "*.<rule>" matched the label at i-1
                if n + 1 > best_len:
                    best, best_len = ".".join(labels[i - 1 :]), n + 1
        return best

    def registrable_domain(self, name: str) -> str | None:
        suffix = self.public_suffix(name)
        if name == suffix:
            return None
        prefix = name[: -(len(suffix) + 1)]
        return prefix.split(".")[-1] + "." + suffix


def extract_sld(fqdn: str, table: PublicSuffixTable) -> str | None:
    """Registrable domain of ``fqdn``, or None for bare/unlisted suffixes."""
    name = normalize_fqdn(fqdn)
    if not is_valid_fqdn(name):
        return None
    return table.registrable_domain(name)


def load_bundled_table() -> PublicSuffixTable:
    text = resources.files("gatewatch.data").joinpath("public_suffixes.dat").read_text("utf-8")
    return PublicSuffixTable.parse(text)
