"""Audit-target selection from a popularity rank list.

Input is CSV ``rank,domain`` sorted by rank ascending (the usual export
of aggregate popularity lists). For each requested TLD the top
``per_tld_cap`` domains are kept, fewer when the list has fewer.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from ..domains import tld_of

__all__ = ["MalformedRankLine", "Target", "select_targets"]


class MalformedRankLine(ValueError):
    """A rank-list line is not ``rank,domain``."""


@dataclass(frozen=True)
class Target:
    domain: str
    tld: str
    rank: int


def select_targets(
    rank_csv: str,
    tlds: list[str],
    per_tld_cap: int = 1000,
) -> list[Target]:
    """Pick the top-ranked domains per requested TLD.

    Returns targets grouped in the order the TLDs were requested, each
    group ordered by rank.
    """
    wanted = [t.lstrip(".").lower() for t in tlds]
    by_tld: dict[str, list[Target]] = {t: [] for t in wanted}

    reader = csv.reader(io.StringIO(rank_csv))
    for line_number, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) < 2:
            raise MalformedRankLine(f"line {line_number}: expected rank,domain")
        rank_text, domain = row[0].strip(), row[1].strip().lower()
        if rank_text.lower() == "rank":  # optional header
            continue
        try:
            rank = int(rank_text)
        except ValueError:
            raise MalformedRankLine(
                f"line {line_number}: rank {rank_text!r} is not an integer"
            )
        if not domain:
            raise MalformedRankLine(f"line {line_number}: empty domain")
        tld = tld_of(domain)
        if tld in by_tld:
            by_tld[tld].append(Target(domain=domain, tld=tld, rank=rank))

    selected: list[Target] = []
    for tld in wanted:
        candidates = sorted(by_tld[tld], key=lambda t: t.rank)
        selected.extend(candidates[:per_tld_cap])
    return selected
