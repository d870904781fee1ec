"""Registrable-domain handling backed by a bundled public-suffix snapshot.

The snapshot is a trimmed, offline copy covering the TLDs this toolkit
meets in practice plus common multi-label suffixes; unknown TLDs fall
back to treating the last label as the suffix. A full public-suffix
file (one suffix per line, '//' comments) can be supplied instead.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from urllib.parse import urlsplit

__all__ = ["registrable_domain", "host_of", "tld_of", "is_subdomain_of"]


def _load_bundled() -> frozenset[str]:
    text = (
        resources.files("tcfaudit.data").joinpath("public_suffixes.dat").read_text()
    )
    return _parse_suffixes(text)


def _parse_suffixes(text: str) -> frozenset[str]:
    suffixes = set()
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("//") or line.startswith("#"):
            continue
        suffixes.add(line.lower().lstrip("*."))
    return frozenset(suffixes)


@lru_cache(maxsize=1)
def _default_suffixes() -> frozenset[str]:
    return _load_bundled()


def host_of(url_or_host: str) -> str:
    """Host portion of a URL, or the input itself when it is a bare host."""
    if "//" in url_or_host:
        host = urlsplit(url_or_host).hostname or ""
    else:
        host = url_or_host.split("/", 1)[0].split(":", 1)[0]
    return host.strip(".").lower()


def registrable_domain(url_or_host: str, suffixes: frozenset[str] | None = None) -> str:
    """Public suffix plus one label, e.g. news.bbc.co.uk -> bbc.co.uk.

    A host that is itself a public suffix, an IP address, or empty is
    returned unchanged.
    """
    host = host_of(url_or_host)
    if not host or host.replace(".", "").isdigit():
        return host
    table = suffixes if suffixes is not None else _default_suffixes()
    labels = host.split(".")
    matched = 1  # unknown TLD: last label acts as the suffix
    for take in range(1, len(labels)):
        candidate = ".".join(labels[-take - 1 :])
        if candidate in table:
            matched = take + 1
    if matched >= len(labels):
        return host
    return ".".join(labels[-(matched + 1) :])


def tld_of(domain: str) -> str:
    """Last label of a domain, without a leading dot."""
    host = host_of(domain)
    return host.rsplit(".", 1)[-1] if host else ""


def is_subdomain_of(host: str, domain: str) -> bool:
    """True when host equals domain or is a dot-subdomain of it."""
    host = host_of(host)
    domain = host_of(domain)
    return host == domain or host.endswith("." + domain)
