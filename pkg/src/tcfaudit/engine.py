"""Suspected-violation detection rules over reconciled session records.

Detection is per record and pure given the registry and tracker list,
so records can be audited in parallel and results merged. The engine
reports *suspected* violations only; judging legality is out of scope.

Rule thresholds default to: at least one accepted purpose for consent
stored before any user action, all five purposes for consent stored
after an explicit refusal. Post-refusal strings with one to four
purposes are tracked as a separate sub-threshold statistic, never as
findings. Purposes above the five defined ones never influence rules
but are surfaced as anomalies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .capture import (
    API_CHANNELS,
    URL_CHANNELS,
    BannerState,
    Channel,
    ConsentObservation,
    Phase,
    SessionRecord,
    needs_human_review,
    reconcile_annotations,
)
from .codec import ConsentString
from .domains import registrable_domain
from .registry import (
    CmpIdentity,
    CmpStatus,
    VendorRegistry,
    has_consent_based_vendor,
    identify_cmp,
)
from .trackers import TrackerList

__all__ = [
    "MissingPhase",
    "ViolationKind",
    "EvidenceRef",
    "ViolationFinding",
    "DetectionConfig",
    "TrackerPhaseCounts",
    "RecordAudit",
    "attribute_cmp",
    "detect_consent_before_choice",
    "detect_non_respect",
    "detect_banner_violations",
    "detect_shared_cookie_escalation",
    "detect_url_channel_findings",
    "detect_nonexistent_vendors",
    "check_nonexistent_vendors",
    "count_trackers",
    "audit_record",
    "audit_records",
    "finding_to_dict",
    "finding_from_dict",
]


class MissingPhase(ValueError):
    """A detector was invoked without the phase its rule needs."""


class ViolationKind(Enum):
    CONSENT_BEFORE_CHOICE = "consent_before_choice"
    NO_WAY_TO_OPT_OUT = "no_way_to_opt_out"
    PRE_SELECTED = "pre_selected"
    NON_RESPECT_OF_CHOICE = "non_respect_of_choice"
    SHARED_COOKIE_BEFORE_CHOICE = "shared_cookie_before_choice"
    SHARED_COOKIE_NON_RESPECT = "shared_cookie_non_respect"
    URL_ONLY_BEFORE_CHOICE = "url_only_before_choice"
    URL_ONLY_NON_RESPECT = "url_only_non_respect"
    CMP_ID_MISMATCH = "cmp_id_mismatch"
    INVALID_CMP_ID = "invalid_cmp_id"
    NONEXISTENT_VENDORS = "nonexistent_vendors"


@dataclass(frozen=True)
class EvidenceRef:
    phase: Phase
    channel: Channel
    raw: str


@dataclass(frozen=True)
class ViolationFinding:
    kind: ViolationKind
    domain: str
    cmp: CmpIdentity | None = None
    evidence: tuple[EvidenceRef, ...] = ()
    purposes_count: int = 0


@dataclass(frozen=True)
class DetectionConfig:
    # "positive consent" thresholds over the five TCF purposes
    min_purposes_before_choice: int = 1
    required_purposes_after_refusal: int = 5


@dataclass(frozen=True)
class TrackerPhaseCounts:
    tracking_requests: int
    total_third_party: int


@dataclass
class RecordAudit:
    """Everything the engine derives from one session record."""

    domain: str
    findings: list[ViolationFinding]
    cmp: CmpIdentity | None
    subthreshold_post_refusal: bool = False
    excluded_empty_vendors: bool = False
    excluded_li_only: bool = False
    shared_cookie_reused: bool = False
    needs_review: bool = False
    anomalies: list[str] = field(default_factory=list)
    tracker_counts: dict[Phase, TrackerPhaseCounts] | None = None

    def kinds(self) -> frozenset[ViolationKind]:
        return frozenset(f.kind for f in self.findings)


_PHASE_ORDER = (Phase.NO_ACTION, Phase.AFTER_REFUSE, Phase.AFTER_ACCEPT)


def attribute_cmp(record: SessionRecord, registry: VendorRegistry) -> CmpIdentity | None:
    """CMP responsible for the banner, taken from the first decodable
    consent string answered by the standard APIs or the shared cookie.
    None when the site never produced one."""
    for phase in _PHASE_ORDER:
        for obs in record.observations(phase=phase, channels=API_CHANNELS):
            consent = obs.consent
            if consent is not None:
                return identify_cmp(consent.cmp_id, registry)
    return None


def _qualifying_purposes(
    consent: ConsentString, registry: VendorRegistry, minimum: int
) -> int:
    """Purposes count when the string carries positive, consent-based
    consent at the given threshold; 0 otherwise."""
    count = consent.purposes_count()
    if count < max(minimum, 1):
        return 0
    if not consent.allowed_vendors:
        return 0
    if not has_consent_based_vendor(consent, registry):
        return 0
    return count


def _scan_phase(
    record: SessionRecord,
    phase: Phase,
    channels: frozenset[Channel],
    registry: VendorRegistry,
    minimum: int,
) -> tuple[int, list[ConsentObservation]]:
    """Max qualifying purposes count and the observations that qualify."""
    best = 0
    hits: list[ConsentObservation] = []
    for obs in record.observations(phase=phase, channels=channels):
        consent = obs.consent
        if consent is None:
            continue
        count = _qualifying_purposes(consent, registry, minimum)
        if count:
            hits.append(obs)
            best = max(best, count)
    return best, hits


def _evidence(phase: Phase, observations: list[ConsentObservation]) -> tuple[EvidenceRef, ...]:
    return tuple(EvidenceRef(phase, o.channel, o.raw) for o in observations)


def detect_consent_before_choice(
    record: SessionRecord,
    registry: VendorRegistry,
    config: DetectionConfig = DetectionConfig(),
    channels: frozenset[Channel] = API_CHANNELS,
) -> ViolationFinding | None:
    """Positive consent answered by the CMP before any user action."""
    if not record.tcf_banner_detected:
        return None
    best, hits = _scan_phase(
        record, Phase.NO_ACTION, channels, registry, config.min_purposes_before_choice
    )
    if not best:
        return None
    kind = (
        ViolationKind.SHARED_COOKIE_BEFORE_CHOICE
        if channels == frozenset({Channel.SHARED_COOKIE})
        else ViolationKind.CONSENT_BEFORE_CHOICE
    )
    return ViolationFinding(
        kind=kind,
        domain=record.domain,
        cmp=attribute_cmp(record, registry),
        evidence=_evidence(Phase.NO_ACTION, hits),
        purposes_count=best,
    )


def detect_non_respect(
    record: SessionRecord,
    registry: VendorRegistry,
    config: DetectionConfig = DetectionConfig(),
    channels: frozenset[Channel] = API_CHANNELS,
) -> ViolationFinding | None:
    """Full positive consent stored although the user refused.

    Requires an after-refusal phase on a record whose reconciled
    annotation says refusing was possible; raises MissingPhase
    otherwise.
    """
    resolved = reconcile_annotations(record)
    if resolved.opt_out_possible is not True or Phase.AFTER_REFUSE not in record.phases:
        raise MissingPhase(
            f"{record.domain}: non-respect rule needs an after-refusal phase "
            "on an opt-out-capable banner"
        )
    best, hits = _scan_phase(
        record,
        Phase.AFTER_REFUSE,
        channels,
        registry,
        config.required_purposes_after_refusal,
    )
    if not best:
        return None
    kind = (
        ViolationKind.SHARED_COOKIE_NON_RESPECT
        if channels == frozenset({Channel.SHARED_COOKIE})
        else ViolationKind.NON_RESPECT_OF_CHOICE
    )
    return ViolationFinding(
        kind=kind,
        domain=record.domain,
        cmp=attribute_cmp(record, registry),
        evidence=_evidence(Phase.AFTER_REFUSE, hits),
        purposes_count=best,
    )


def detect_banner_violations(record: SessionRecord) -> list[ViolationFinding]:
    """Annotation-based findings: no way to opt out, pre-selected choices.

    Pre-selection is only assessed where refusal is possible; broken
    banners yield nothing and stay out of every denominator.
    """
    resolved = reconcile_annotations(record)
    if resolved.banner_state is not BannerState.PRESENT:
        return []  # broken or missing banner: no findings, no denominators
    findings = []
    if resolved.opt_out_possible is False:
        findings.append(
            ViolationFinding(kind=ViolationKind.NO_WAY_TO_OPT_OUT, domain=record.domain)
        )
    if resolved.opt_out_possible is True and resolved.pre_selected is True:
        findings.append(
            ViolationFinding(kind=ViolationKind.PRE_SELECTED, domain=record.domain)
        )
    return findings


def shared_cookie_reused(record: SessionRecord) -> bool:
    """True when the CMP echoed back the exact consent string planted in
    the shared cookie before any banner interaction."""
    probe = record.shared_cookie_probe
    return probe is not None and probe.reused


def detect_shared_cookie_escalation(
    record: SessionRecord,
    registry: VendorRegistry,
    config: DetectionConfig = DetectionConfig(),
) -> list[ViolationFinding]:
    """The two consent rules restricted to the shared-cookie channel.

    A violating string in the shared cookie escalates the problem: the
    cookie is readable by every CMP on every participating site.
    """
    only_cookie = frozenset({Channel.SHARED_COOKIE})
    findings = []
    before = detect_consent_before_choice(record, registry, config, channels=only_cookie)
    if before is not None:
        findings.append(before)
    resolved = record.reconciled()
    if (
        resolved is not None
        and resolved.opt_out_possible is True
        and Phase.AFTER_REFUSE in record.phases
    ):
        after = detect_non_respect(record, registry, config, channels=only_cookie)
        if after is not None:
            findings.append(after)
    return findings


def _observations_with_phase(
    record: SessionRecord, channels: frozenset[Channel] | None = None
):
    for phase in _PHASE_ORDER:
        capture = record.phases.get(phase)
        if capture is None:
            continue
        for obs in capture.observations:
            if channels is None or obs.channel in channels:
                yield phase, obs


def _decoded_cmp_ids(
    record: SessionRecord, channels: frozenset[Channel]
) -> dict[int, EvidenceRef]:
    ids: dict[int, EvidenceRef] = {}
    for phase, obs in _observations_with_phase(record, channels):
        consent = obs.consent
        if consent is not None and consent.cmp_id not in ids:
            ids[consent.cmp_id] = EvidenceRef(phase, obs.channel, obs.raw)
    return ids


def _url_rule_counts(
    record: SessionRecord, registry: VendorRegistry, config: DetectionConfig
) -> tuple[tuple[int, list], tuple[int, list], bool, bool]:
    url_before = _scan_phase(
        record, Phase.NO_ACTION, URL_CHANNELS, registry,
        config.min_purposes_before_choice,
    )
    url_after = _scan_phase(
        record, Phase.AFTER_REFUSE, URL_CHANNELS, registry,
        config.required_purposes_after_refusal,
    )
    api_before = detect_consent_before_choice(record, registry, config) is not None
    resolved = record.reconciled()
    api_after = False
    if (
        resolved is not None
        and resolved.opt_out_possible is True
        and Phase.AFTER_REFUSE in record.phases
    ):
        api_after = detect_non_respect(record, registry, config) is not None
    return url_before, url_after, api_before, api_after


def _url_channel_findings(
    record: SessionRecord, registry: VendorRegistry, config: DetectionConfig
) -> list[ViolationFinding]:
    findings: list[ViolationFinding] = []
    cmp = attribute_cmp(record, registry)

    if record.tcf_banner_detected:
        (url_before, before_hits), (url_after, after_hits), api_before, api_after = (
            _url_rule_counts(record, registry, config)
        )
        if url_before and not api_before:
            findings.append(
                ViolationFinding(
                    kind=ViolationKind.URL_ONLY_BEFORE_CHOICE,
                    domain=record.domain,
                    cmp=cmp,
                    evidence=_evidence(Phase.NO_ACTION, before_hits),
                    purposes_count=url_before,
                )
            )
        if url_after and not api_after:
            findings.append(
                ViolationFinding(
                    kind=ViolationKind.URL_ONLY_NON_RESPECT,
                    domain=record.domain,
                    cmp=cmp,
                    evidence=_evidence(Phase.AFTER_REFUSE, after_hits),
                    purposes_count=url_after,
                )
            )

    api_ids = _decoded_cmp_ids(record, API_CHANNELS)
    url_ids = _decoded_cmp_ids(record, URL_CHANNELS)
    mismatch_evidence: list[EvidenceRef] = []
    for url_id, url_ref in url_ids.items():
        if identify_cmp(url_id, registry).status is not CmpStatus.KNOWN:
            continue
        for api_id, api_ref in api_ids.items():
            if url_id == api_id:
                continue
            if identify_cmp(api_id, registry).status is not CmpStatus.KNOWN:
                continue
            mismatch_evidence = [api_ref, url_ref]
            break
        if mismatch_evidence:
            break
    if mismatch_evidence:
        findings.append(
            ViolationFinding(
                kind=ViolationKind.CMP_ID_MISMATCH,
                domain=record.domain,
                cmp=cmp,
                evidence=tuple(mismatch_evidence),
            )
        )

    invalid_evidence: list[EvidenceRef] = []
    invalid_identity = None
    for phase, obs in _observations_with_phase(record):
        consent = obs.consent
        if consent is None:
            continue
        identity = identify_cmp(consent.cmp_id, registry)
        if identity.status is CmpStatus.INVALID:
            invalid_evidence.append(EvidenceRef(phase, obs.channel, obs.raw))
            invalid_identity = invalid_identity or identity
    if invalid_evidence:
        findings.append(
            ViolationFinding(
                kind=ViolationKind.INVALID_CMP_ID,
                domain=record.domain,
                cmp=invalid_identity,
                evidence=tuple(invalid_evidence),
            )
        )
    return findings


def detect_url_channel_findings(
    records,
    registry: VendorRegistry,
    config: DetectionConfig = DetectionConfig(),
) -> list[ViolationFinding]:
    """URL-channel rules over one or many records: violations seen only
    in request URLs (not via the APIs), CMP-id mismatches between the
    two channel families, and invalid CMP ids on any channel."""
    if isinstance(records, SessionRecord):
        records = [records]
    findings: list[ViolationFinding] = []
    for record in records:
        findings.extend(_url_channel_findings(record, registry, config))
    return findings


def check_nonexistent_vendors(
    observation: ConsentObservation, registry: VendorRegistry, phase: Phase = Phase.NO_ACTION
) -> ViolationFinding | None:
    """Finding when the observation grants consent to vendor ids beyond
    the highest id in the loaded vendor list."""
    consent = observation.consent
    if consent is None or not consent.allowed_vendors:
        return None
    max_listed = registry.max_vendor_id
    if max_listed and max(consent.allowed_vendors) > max_listed:
        return ViolationFinding(
            kind=ViolationKind.NONEXISTENT_VENDORS,
            domain=registrable_domain(observation.page_url),
            evidence=(EvidenceRef(phase, observation.channel, observation.raw),),
        )
    return None


def detect_nonexistent_vendors(
    record: SessionRecord, registry: VendorRegistry
) -> ViolationFinding | None:
    for phase, obs in _observations_with_phase(record):
        hit = check_nonexistent_vendors(obs, registry, phase)
        if hit is not None:
            return ViolationFinding(
                kind=ViolationKind.NONEXISTENT_VENDORS,
                domain=record.domain,
                cmp=attribute_cmp(record, registry),
                evidence=hit.evidence,
            )
    return None


def count_trackers(
    record: SessionRecord, tracker_list: TrackerList
) -> dict[Phase, TrackerPhaseCounts]:
    """Per phase: requests to listed tracker domains (subdomains count)
    and total third-party requests."""
    counts = {}
    for phase, capture in record.phases.items():
        counts[phase] = TrackerPhaseCounts(
            tracking_requests=sum(
                1 for r in capture.requests if tracker_list.is_tracker(r.url)
            ),
            total_third_party=sum(1 for r in capture.requests if r.third_party),
        )
    return counts


def _collect_anomalies(record: SessionRecord, audit: RecordAudit) -> None:
    for phase in _PHASE_ORDER:
        capture = record.phases.get(phase)
        if capture is None:
            continue
        for obs in capture.observations:
            if not obs.decodable:
                audit.anomalies.append(
                    f"{phase.value}/{obs.channel.value}: undecodable consent string "
                    f"({obs.decode_error})"
                )
                continue
            extra = obs.consent.extra_purposes()
            if extra:
                audit.anomalies.append(
                    f"{phase.value}/{obs.channel.value}: sets "
                    f"{len(obs.consent.allowed_purposes)} purposes, beyond the 5 defined"
                )
            if obs.gdpr_applies_param is False:
                audit.anomalies.append(
                    f"{phase.value}/{obs.channel.value}: request claims GDPR does not apply"
                )


def _exclusion_notes(
    record: SessionRecord, registry: VendorRegistry, audit: RecordAudit
) -> None:
    """Why a positive-looking pre-action string produced no finding."""
    for obs in record.observations(phase=Phase.NO_ACTION, channels=API_CHANNELS):
        consent = obs.consent
        if consent is None or not consent.purposes_count():
            continue
        if not consent.allowed_vendors:
            audit.excluded_empty_vendors = True
        elif not has_consent_based_vendor(consent, registry):
            audit.excluded_li_only = True


def audit_record(
    record: SessionRecord,
    registry: VendorRegistry,
    tracker_list: TrackerList | None = None,
    config: DetectionConfig = DetectionConfig(),
) -> RecordAudit:
    """Run every applicable detector on one record."""
    audit = RecordAudit(
        domain=record.domain,
        findings=[],
        cmp=attribute_cmp(record, registry),
        shared_cookie_reused=shared_cookie_reused(record),
        needs_review=needs_human_review(record),
    )

    before = detect_consent_before_choice(record, registry, config)
    if before is not None:
        audit.findings.append(before)

    resolved = record.reconciled()
    if resolved is not None:
        audit.findings.extend(detect_banner_violations(record))
        if resolved.opt_out_possible is True and Phase.AFTER_REFUSE in record.phases:
            after = detect_non_respect(record, registry, config)
            if after is not None:
                audit.findings.append(after)
            else:
                best, _ = _scan_phase(record, Phase.AFTER_REFUSE, API_CHANNELS, registry, 1)
                audit.subthreshold_post_refusal = (
                    0 < best < config.required_purposes_after_refusal
                )

    audit.findings.extend(detect_shared_cookie_escalation(record, registry, config))
    audit.findings.extend(detect_url_channel_findings(record, registry, config))
    nonexistent = detect_nonexistent_vendors(record, registry)
    if nonexistent is not None:
        audit.findings.append(nonexistent)

    _exclusion_notes(record, registry, audit)
    _collect_anomalies(record, audit)
    if tracker_list is not None:
        audit.tracker_counts = count_trackers(record, tracker_list)
    return audit


def audit_records(
    records,
    registry: VendorRegistry,
    tracker_list: TrackerList | None = None,
    config: DetectionConfig = DetectionConfig(),
) -> list[RecordAudit]:
    return [audit_record(r, registry, tracker_list, config) for r in records]


def finding_to_dict(finding: ViolationFinding) -> dict:
    return {
        "kind": finding.kind.value,
        "domain": finding.domain,
        "cmp_id": finding.cmp.cmp_id if finding.cmp else None,
        "cmp_status": finding.cmp.status.value if finding.cmp else None,
        "cmp_name": finding.cmp.name if finding.cmp else None,
        "purposes_count": finding.purposes_count,
        "evidence": [
            {"phase": e.phase.value, "channel": e.channel.value, "raw": e.raw}
            for e in finding.evidence
        ],
    }


def finding_from_dict(data: dict) -> ViolationFinding:
    cmp = None
    if data.get("cmp_status") is not None:
        cmp = CmpIdentity(
            status=CmpStatus(data["cmp_status"]),
            cmp_id=int(data.get("cmp_id") or 0),
            name=data.get("cmp_name"),
        )
    return ViolationFinding(
        kind=ViolationKind(data["kind"]),
        domain=data["domain"],
        cmp=cmp,
        purposes_count=int(data.get("purposes_count", 0)),
        evidence=tuple(
            EvidenceRef(Phase(e["phase"]), Channel(e["channel"]), e["raw"])
            for e in data.get("evidence", ())
        ),
    )
