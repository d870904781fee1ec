"""Aggregation of findings into an audit report and its renderings.

Percentages are rendered to one decimal (two for the any-violation
headline) with the raw numerator/denominator always alongside, so
rounding never loses data. Pre-selection and non-respect rates are
computed only over sites where refusal was possible and the banner
worked; broken or missing banners stay out of those denominators.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable

from .capture import BannerState, Phase, SessionRecord
from .engine import RecordAudit, ViolationFinding, ViolationKind

__all__ = [
    "InconsistentInputs",
    "RecordSummary",
    "AuditReport",
    "summarize_record",
    "build_report",
    "render_report",
    "report_to_dict",
    "report_from_dict",
]

KIND_ORDER = [k.value for k in ViolationKind]

# Kinds whose rates are relative to all banner sites versus only the
# sites where refusing was possible.
_BANNER_DENOMINATOR_KINDS = {
    ViolationKind.CONSENT_BEFORE_CHOICE.value,
    ViolationKind.SHARED_COOKIE_BEFORE_CHOICE.value,
    ViolationKind.URL_ONLY_BEFORE_CHOICE.value,
    ViolationKind.CMP_ID_MISMATCH.value,
    ViolationKind.INVALID_CMP_ID.value,
    ViolationKind.NONEXISTENT_VENDORS.value,
}
_ANNOTATED_DENOMINATOR_KINDS = {ViolationKind.NO_WAY_TO_OPT_OUT.value}
_MAIN_KINDS = [
    ViolationKind.CONSENT_BEFORE_CHOICE.value,
    ViolationKind.NO_WAY_TO_OPT_OUT.value,
    ViolationKind.PRE_SELECTED.value,
    ViolationKind.NON_RESPECT_OF_CHOICE.value,
]

_CMP_ROW_INCORRECT = "incorrect CMP ID"
_CMP_ROW_OTHERS = "others"
_CMP_ROW_NO_STRING = "No consent string found"


class InconsistentInputs(ValueError):
    """A finding references a domain absent from the audited records."""


def _pct(numerator: int, denominator: int, digits: int = 1) -> float:
    if denominator == 0:
        return 0.0
    exact = Decimal(numerator * 100) / Decimal(denominator)
    quantum = Decimal(1).scaleb(-digits)
    return float(exact.quantize(quantum, rounding=ROUND_HALF_UP))


def _stats(numerator: int, denominator: int, digits: int = 1) -> dict:
    return {
        "numerator": numerator,
        "denominator": denominator,
        "percent": _pct(numerator, denominator, digits),
    }


@dataclass
class RecordSummary:
    """The per-record facts the aggregation needs, independent of the
    full capture. This is what the audit bundle stores per record."""

    domain: str
    tld: str
    tranco_rank: int | None = None
    banner_detected: bool = False
    annotated: bool = False
    banner_state: str | None = None
    opt_out_possible: bool | None = None
    tracker_counts: dict[str, list[int]] | None = None
    shared_cookie_reused: bool = False
    subthreshold_post_refusal: bool = False
    excluded_li_only: bool = False
    excluded_empty_vendors: bool = False
    needs_review: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RecordSummary":
        known = {f: data.get(f) for f in cls.__dataclass_fields__ if f in data}
        return cls(**known)


def summarize_record(record: SessionRecord, audit: RecordAudit | None = None) -> RecordSummary:
    resolved = record.reconciled()
    tracker_counts = None
    if audit is not None and audit.tracker_counts is not None:
        tracker_counts = {
            phase.value: [c.tracking_requests, c.total_third_party]
            for phase, c in sorted(audit.tracker_counts.items(), key=lambda kv: kv[0].value)
        }
    return RecordSummary(
        domain=record.domain,
        tld=record.tld,
        tranco_rank=record.tranco_rank,
        banner_detected=record.tcf_banner_detected,
        annotated=bool(record.annotations),
        banner_state=resolved.banner_state.value if resolved else None,
        opt_out_possible=resolved.opt_out_possible if resolved else None,
        tracker_counts=tracker_counts,
        shared_cookie_reused=(
            audit.shared_cookie_reused
            if audit is not None
            else bool(record.shared_cookie_probe and record.shared_cookie_probe.reused)
        ),
        subthreshold_post_refusal=bool(audit and audit.subthreshold_post_refusal),
        excluded_li_only=bool(audit and audit.excluded_li_only),
        excluded_empty_vendors=bool(audit and audit.excluded_empty_vendors),
        needs_review=bool(audit and audit.needs_review),
    )


@dataclass
class AuditReport:
    total_records: int = 0
    banner_detected: int = 0
    annotated: int = 0
    no_opt_out_sites: int = 0
    broken_or_missing: int = 0
    opt_out_possible: int = 0
    opt_out_unassessed: int = 0
    violation_totals: dict = field(default_factory=dict)
    any_violation: dict = field(default_factory=lambda: _stats(0, 0, 2))
    purpose_split: dict = field(default_factory=dict)
    subthreshold_post_refusal: int = 0
    per_tld: dict = field(default_factory=dict)
    per_cmp: list = field(default_factory=list)
    cmp_row_threshold: int = 5
    top_sites: dict = field(default_factory=dict)
    top_n: int = 20
    tracker_means: dict = field(default_factory=dict)
    shared_cookie_reuse_sites: int = 0
    excluded_li_only: int = 0
    excluded_empty_vendors: int = 0
    needs_review_domains: list = field(default_factory=list)
    gvl_version: int | None = None


def _denominators(summaries: list[RecordSummary]) -> dict[str, int]:
    banner = sum(1 for s in summaries if s.banner_detected)
    annotated = sum(1 for s in summaries if s.annotated)
    no_opt_out = sum(
        1
        for s in summaries
        if s.annotated
        and s.banner_state == BannerState.PRESENT.value
        and s.opt_out_possible is False
    )
    broken_or_missing = sum(
        1
        for s in summaries
        if s.annotated and s.banner_state != BannerState.PRESENT.value
    )
    opt_out_possible = sum(
        1
        for s in summaries
        if s.annotated
        and s.banner_state == BannerState.PRESENT.value
        and s.opt_out_possible is True
    )
    unassessed = annotated - no_opt_out - broken_or_missing - opt_out_possible
    return {
        "banner": banner,
        "annotated": annotated,
        "no_opt_out": no_opt_out,
        "broken_or_missing": broken_or_missing,
        "opt_out_possible": opt_out_possible,
        "unassessed": unassessed,
    }


def _kind_denominator(kind: str, dens: dict[str, int]) -> int:
    if kind in _BANNER_DENOMINATOR_KINDS:
        return dens["banner"]
    if kind in _ANNOTATED_DENOMINATOR_KINDS:
        return dens["annotated"]
    return dens["opt_out_possible"]


def _violating_domains(findings: Iterable[ViolationFinding]) -> dict[str, set[str]]:
    by_kind: dict[str, set[str]] = {k: set() for k in KIND_ORDER}
    for finding in findings:
        by_kind[finding.kind.value].add(finding.domain)
    return by_kind


def _cmp_bucket(finding_cmps: dict[str, tuple], summary: RecordSummary) -> str:
    cmp = finding_cmps.get(summary.domain)
    if cmp is None:
        return _CMP_ROW_NO_STRING
    status, name = cmp
    if status == "invalid":
        return _CMP_ROW_INCORRECT
    if status == "known" and name:
        return name
    return _CMP_ROW_OTHERS


def build_report(
    findings: list[ViolationFinding],
    records: Iterable[SessionRecord | RecordSummary],
    cmp_attribution: dict[str, tuple] | None = None,
    cmp_row_threshold: int = 5,
    top_n: int = 20,
    gvl_version: int | None = None,
) -> AuditReport:
    """Aggregate findings over the audited records.

    ``cmp_attribution`` maps domain -> (status, name) from the engine's
    CMP attribution; without it every stringful site lands in "others".
    Raises InconsistentInputs when a finding references an unknown
    domain.
    """
    summaries = [
        r if isinstance(r, RecordSummary) else summarize_record(r) for r in records
    ]
    domains = {s.domain for s in summaries}
    for finding in findings:
        if finding.domain not in domains:
            raise InconsistentInputs(
                f"finding for unknown domain {finding.domain!r}"
            )

    dens = _denominators(summaries)
    by_kind = _violating_domains(findings)

    report = AuditReport(
        total_records=len(summaries),
        banner_detected=dens["banner"],
        annotated=dens["annotated"],
        no_opt_out_sites=dens["no_opt_out"],
        broken_or_missing=dens["broken_or_missing"],
        opt_out_possible=dens["opt_out_possible"],
        opt_out_unassessed=dens["unassessed"],
        cmp_row_threshold=cmp_row_threshold,
        top_n=top_n,
        gvl_version=gvl_version,
    )

    for kind in KIND_ORDER:
        report.violation_totals[kind] = _stats(
            len(by_kind[kind]), _kind_denominator(kind, dens)
        )

    # any-violation counts each site once across kinds, over annotated
    # sites when any annotations exist (the manually tested population)
    scope = (
        {s.domain for s in summaries if s.annotated}
        if dens["annotated"]
        else domains
    )
    violating = set().union(*by_kind.values()) & scope
    report.any_violation = _stats(len(violating), len(scope), 2)

    cbc = [
        f for f in findings if f.kind is ViolationKind.CONSENT_BEFORE_CHOICE
    ]
    nr = [f for f in findings if f.kind is ViolationKind.NON_RESPECT_OF_CHOICE]
    report.subthreshold_post_refusal = sum(
        1 for s in summaries if s.subthreshold_post_refusal
    )
    report.purpose_split = {
        ViolationKind.CONSENT_BEFORE_CHOICE.value: {
            "1_to_4": sum(1 for f in cbc if 1 <= f.purposes_count <= 4),
            "5": sum(1 for f in cbc if f.purposes_count == 5),
        },
        ViolationKind.NON_RESPECT_OF_CHOICE.value: {
            "1_to_4": report.subthreshold_post_refusal,
            "5": len(nr),
        },
    }

    # per-TLD table: every kind for every TLD present
    tlds = sorted({s.tld for s in summaries})
    for tld in tlds:
        subset = [s for s in summaries if s.tld == tld]
        sub_dens = _denominators(subset)
        sub_domains = {s.domain for s in subset}
        report.per_tld[tld] = {
            kind: _stats(
                len(by_kind[kind] & sub_domains), _kind_denominator(kind, sub_dens)
            )
            for kind in KIND_ORDER
        }

    # per-CMP table over the annotated population (all records when
    # nothing is annotated)
    table_scope = [s for s in summaries if s.annotated] or summaries
    attribution = cmp_attribution or {}
    rows: dict[str, list[RecordSummary]] = {}
    for summary in table_scope:
        rows.setdefault(_cmp_bucket(attribution, summary), []).append(summary)

    def _row(name: str, members: list[RecordSummary]) -> dict:
        member_domains = {s.domain for s in members}
        row_dens = _denominators(members)
        kinds = {}
        for kind in _MAIN_KINDS:
            den = (
                len(members)
                if kind in _BANNER_DENOMINATOR_KINDS or kind in _ANNOTATED_DENOMINATOR_KINDS
                else row_dens["opt_out_possible"]
            )
            kinds[kind] = _stats(len(by_kind[kind] & member_domains), den)
        return {"cmp": name, "websites": len(members), "kinds": kinds}

    named = {
        name: members
        for name, members in rows.items()
        if name not in (_CMP_ROW_INCORRECT, _CMP_ROW_OTHERS, _CMP_ROW_NO_STRING)
    }
    others = list(rows.get(_CMP_ROW_OTHERS, []))
    for name, members in sorted(named.items()):
        if len(members) < cmp_row_threshold:
            others.extend(members)
    report.per_cmp = [
        _row(name, members)
        for name, members in sorted(
            named.items(), key=lambda kv: (-len(kv[1]), kv[0])
        )
        if len(members) >= cmp_row_threshold
    ]
    if others:
        report.per_cmp.append(_row(_CMP_ROW_OTHERS, others))
    if _CMP_ROW_INCORRECT in rows:
        report.per_cmp.append(_row(_CMP_ROW_INCORRECT, rows[_CMP_ROW_INCORRECT]))
    if _CMP_ROW_NO_STRING in rows:
        report.per_cmp.append(_row(_CMP_ROW_NO_STRING, rows[_CMP_ROW_NO_STRING]))

    # top violating sites per kind, by popularity rank
    rank_of = {s.domain: s.tranco_rank for s in summaries}
    for kind in KIND_ORDER:
        ranked = sorted(
            by_kind[kind],
            key=lambda d: (rank_of.get(d) is None, rank_of.get(d), d),
        )
        report.top_sites[kind] = [
            [rank_of.get(d), d] for d in ranked[:top_n]
        ]

    # tracker means over sites captured in all three phases
    phased = [
        s
        for s in summaries
        if s.tracker_counts is not None
        and all(p.value in s.tracker_counts for p in Phase)
    ]
    if phased:
        for phase in Phase:
            tracking = [s.tracker_counts[phase.value][0] for s in phased]
            total = [s.tracker_counts[phase.value][1] for s in phased]
            report.tracker_means[phase.value] = {
                "tracking_mean": round(sum(tracking) / len(phased), 4),
                "third_party_mean": round(sum(total) / len(phased), 4),
                "sites": len(phased),
            }

    report.shared_cookie_reuse_sites = sum(
        1 for s in summaries if s.shared_cookie_reused
    )
    report.excluded_li_only = sum(1 for s in summaries if s.excluded_li_only)
    report.excluded_empty_vendors = sum(
        1 for s in summaries if s.excluded_empty_vendors
    )
    report.needs_review_domains = sorted(
        s.domain for s in summaries if s.needs_review
    )
    return report


def report_to_dict(report: AuditReport) -> dict:
    return asdict(report)


def report_from_dict(data: dict) -> AuditReport:
    known = {f: data[f] for f in AuditReport.__dataclass_fields__ if f in data}
    return AuditReport(**known)


def _render_csv(report: AuditReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["tld", "kind", "numerator", "denominator", "percent"])
    for tld, kinds in report.per_tld.items():
        for kind in KIND_ORDER:
            stats = kinds[kind]
            writer.writerow(
                [tld, kind, stats["numerator"], stats["denominator"], stats["percent"]]
            )
    return buffer.getvalue()


def _render_markdown(report: AuditReport) -> str:
    lines = ["# Consent audit report", ""]
    lines.append(
        f"Records: {report.total_records}, with TCF banner: {report.banner_detected}, "
        f"annotated: {report.annotated} "
        f"(no opt-out: {report.no_opt_out_sites}, broken/missing: {report.broken_or_missing}, "
        f"opt-out possible: {report.opt_out_possible})"
    )
    any_v = report.any_violation
    lines.append(
        f"\nAt least one suspected violation: {any_v['percent']}% "
        f"({any_v['numerator']}/{any_v['denominator']})"
    )
    lines += ["", "## Suspected violations", "", "| kind | sites | share |", "|---|---|---|"]
    for kind in KIND_ORDER:
        stats = report.violation_totals[kind]
        lines.append(
            f"| {kind} | {stats['numerator']}/{stats['denominator']} | {stats['percent']}% |"
        )
    if report.per_tld:
        lines += ["", "## Per TLD", ""]
        header = "| tld | " + " | ".join(_MAIN_KINDS) + " |"
        lines += [header, "|" + "---|" * (len(_MAIN_KINDS) + 1)]
        for tld, kinds in report.per_tld.items():
            cells = [
                f"{kinds[k]['numerator']}/{kinds[k]['denominator']} ({kinds[k]['percent']}%)"
                for k in _MAIN_KINDS
            ]
            lines.append(f"| {tld} | " + " | ".join(cells) + " |")
    if report.per_cmp:
        lines += ["", f"## Per CMP (named rows: seen >= {report.cmp_row_threshold})", ""]
        header = "| CMP | websites | " + " | ".join(_MAIN_KINDS) + " |"
        lines += [header, "|" + "---|" * (len(_MAIN_KINDS) + 2)]
        for row in report.per_cmp:
            cells = [
                f"{row['kinds'][k]['numerator']}/{row['kinds'][k]['denominator']}"
                for k in _MAIN_KINDS
            ]
            lines.append(
                f"| {row['cmp']} | {row['websites']} | " + " | ".join(cells) + " |"
            )
    if report.tracker_means:
        lines += ["", "## Third-party tracking requests (mean per site)", ""]
        lines += ["| phase | tracking | all third-party |", "|---|---|---|"]
        for phase in Phase:
            means = report.tracker_means.get(phase.value)
            if means:
                lines.append(
                    f"| {phase.value} | {means['tracking_mean']:.2f} | "
                    f"{means['third_party_mean']:.2f} |"
                )
    if report.subthreshold_post_refusal:
        lines += [
            "",
            f"Post-refusal strings with 1-4 purposes (not counted as violations): "
            f"{report.subthreshold_post_refusal}",
        ]
    if report.shared_cookie_reuse_sites:
        lines.append(
            f"\nSites returning a planted shared cookie unchanged: "
            f"{report.shared_cookie_reuse_sites}"
        )
    if report.needs_review_domains:
        lines.append(
            "\nFlagged for human review (operators split across violation kinds): "
            + ", ".join(report.needs_review_domains)
        )
    return "\n".join(lines) + "\n"


def render_report(report: AuditReport, fmt: str = "json") -> str:
    """Render as ``json`` (lossless), ``csv`` (per-TLD view) or
    ``markdown``."""
    fmt = fmt.lower()
    if fmt == "json":
        return json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        return _render_csv(report)
    if fmt in ("markdown", "md"):
        return _render_markdown(report)
    raise ValueError(f"unknown report format {fmt!r}")
