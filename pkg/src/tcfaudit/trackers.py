"""Tracker-domain classification from a Disconnect-format list.

Matching is by registrable-domain suffix: a request host matches a
listed domain when it equals it or is one of its subdomains.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .domains import host_of
from .registry import SchemaError

__all__ = ["TrackerList", "load_disconnect_list", "load_domain_lines"]


@dataclass
class TrackerList:
    company_by_domain: dict[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.company_by_domain)

    def company_for(self, url_or_host: str) -> str | None:
        """Owning company when the host is a listed tracker domain or a
        subdomain of one, else None."""
        host = host_of(url_or_host)
        labels = host.split(".")
        for i in range(len(labels) - 1):
            candidate = ".".join(labels[i:])
            company = self.company_by_domain.get(candidate)
            if company is not None:
                return company
        return None

    def is_tracker(self, url_or_host: str) -> bool:
        return self.company_for(url_or_host) is not None


def load_disconnect_list(document: str) -> TrackerList:
    """Parse the Disconnect services format:
    {"categories": {category: [{company: {info_url: [domains...]}}]}}."""
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"tracker list: not valid JSON: {exc}") from exc
    categories = data.get("categories")
    if not isinstance(categories, dict):
        raise SchemaError("tracker list: missing categories object")
    tracker_list = TrackerList()
    for entries in categories.values():
        if not isinstance(entries, list):
            continue
        for company_entry in entries:
            if not isinstance(company_entry, dict):
                continue
            for company, urls in company_entry.items():
                if not isinstance(urls, dict):
                    continue
                for domains in urls.values():
                    if not isinstance(domains, list):
                        continue
                    for domain in domains:
                        tracker_list.company_by_domain[host_of(str(domain))] = company
    return tracker_list


def load_domain_lines(text: str) -> TrackerList:
    """Plain-text fallback: one tracker domain per line, '#' comments."""
    tracker_list = TrackerList()
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tracker_list.company_by_domain[host_of(line)] = line
    return tracker_list
