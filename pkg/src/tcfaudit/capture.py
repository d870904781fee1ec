"""Audit-session capture format: parsing, validation, reconciliation.

Captures are JSON-lines, one website session per line, produced by
crawlers, the corpus simulator, or the inspector extension. Records are
immutable after load; every phase is a separate clean browser session,
so no cookie state carries across phases except the explicit shared
cookie probe.

Wire schema (field names are the contract, shared with the extension):

    domain, tld, tranco_rank, tcf_banner_detected,
    phases.{no_action|after_refuse|after_accept}.{observations[], requests[]},
    annotations[], shared_cookie_probe{injected_raw, returned_raw}

    observation: channel, raw, page_url, request_url, gdpr_applies_param,
                 timestamp_ms
    request:     url, method, third_party
    annotation:  banner_state, opt_out_possible, pre_selected, operator
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Iterator

from .codec import ConsentError, ConsentString, decode_consent_string
from .domains import registrable_domain, tld_of
from .registry import SchemaError

__all__ = [
    "NoAnnotations",
    "Channel",
    "Phase",
    "BannerState",
    "API_CHANNELS",
    "URL_CHANNELS",
    "ConsentObservation",
    "RequestLogEntry",
    "BannerAnnotation",
    "PhaseCapture",
    "SharedCookieProbe",
    "SessionRecord",
    "SessionLoadResult",
    "LineError",
    "record_from_dict",
    "record_to_dict",
    "serialize_sessions",
    "load_sessions",
    "reconcile_annotations",
    "needs_human_review",
]

log = logging.getLogger(__name__)


class NoAnnotations(ValueError):
    """Reconciliation requested on a record without annotations."""


class Channel(Enum):
    CMP_FUNCTION = "cmp_function"
    CMP_LOCATOR_POST_MESSAGE = "cmp_locator_postmessage"
    SHARED_COOKIE = "shared_cookie"
    URL_GET = "url_get"
    URL_POST = "url_post"


# Channels answered by the CMP itself (in-page API calls and the shared
# cookie) versus consent strings observed in outgoing request URLs.
API_CHANNELS = frozenset(
    {Channel.CMP_FUNCTION, Channel.CMP_LOCATOR_POST_MESSAGE, Channel.SHARED_COOKIE}
)
URL_CHANNELS = frozenset({Channel.URL_GET, Channel.URL_POST})


class Phase(Enum):
    NO_ACTION = "no_action"
    AFTER_REFUSE = "after_refuse"
    AFTER_ACCEPT = "after_accept"


class BannerState(Enum):
    PRESENT = "present"
    ABSENT = "absent"
    BROKEN = "broken"


@dataclass(frozen=True)
class ConsentObservation:
    channel: Channel
    raw: str
    page_url: str
    timestamp_ms: int = 0
    request_url: str | None = None
    gdpr_applies_param: bool | None = None

    @cached_property
    def consent(self) -> ConsentString | None:
        """Decoded consent string, or None when undecodable.

        Undecodable observations are retained for forensics; callers
        that apply detection rules skip them.
        """
        try:
            return decode_consent_string(self.raw)
        except ConsentError:
            return None

    @cached_property
    def decode_error(self) -> str | None:
        try:
            decode_consent_string(self.raw)
            return None
        except ConsentError as exc:
            return f"{type(exc).__name__}: {exc}"

    @property
    def decodable(self) -> bool:
        return self.consent is not None


@dataclass(frozen=True)
class RequestLogEntry:
    url: str
    method: str = "GET"
    third_party: bool = True


@dataclass(frozen=True)
class BannerAnnotation:
    banner_state: BannerState
    opt_out_possible: bool | None = None
    pre_selected: bool | None = None
    operator: str = ""


@dataclass(frozen=True)
class PhaseCapture:
    observations: tuple[ConsentObservation, ...] = ()
    requests: tuple[RequestLogEntry, ...] = ()


@dataclass(frozen=True)
class SharedCookieProbe:
    injected_raw: str
    returned_raw: str | None = None

    @property
    def reused(self) -> bool:
        return self.returned_raw is not None and self.returned_raw == self.injected_raw


@dataclass(frozen=True)
class SessionRecord:
    domain: str
    tld: str
    tcf_banner_detected: bool
    tranco_rank: int | None = None
    phases: dict[Phase, PhaseCapture] = field(default_factory=dict)
    annotations: tuple[BannerAnnotation, ...] = ()
    shared_cookie_probe: SharedCookieProbe | None = None

    def observations(
        self,
        phase: Phase | None = None,
        channels: frozenset[Channel] | None = None,
    ) -> Iterator[ConsentObservation]:
        phases = [phase] if phase is not None else list(Phase)
        for ph in phases:
            capture = self.phases.get(ph)
            if capture is None:
                continue
            for obs in capture.observations:
                if channels is None or obs.channel in channels:
                    yield obs

    def reconciled(self) -> BannerAnnotation | None:
        return reconcile_annotations(self) if self.annotations else None


@dataclass(frozen=True)
class LineError:
    line_number: int
    message: str


@dataclass
class SessionLoadResult:
    records: list[SessionRecord]
    errors: list[LineError] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def _observation_from_dict(data: dict, context: str) -> ConsentObservation:
    try:
        channel = Channel(data["channel"])
    except KeyError:
        raise SchemaError(f"{context}: missing observation channel")
    except ValueError:
        raise SchemaError(f"{context}: unknown channel {data['channel']!r}")
    if "raw" not in data:
        raise SchemaError(f"{context}: missing raw consent string")
    request_url = data.get("request_url")
    if channel in URL_CHANNELS and not request_url:
        raise SchemaError(f"{context}: {channel.value} observation needs request_url")
    if channel not in URL_CHANNELS and request_url:
        raise SchemaError(
            f"{context}: request_url only belongs on URL-channel observations"
        )
    gdpr = data.get("gdpr_applies_param")
    if gdpr is not None and not isinstance(gdpr, bool):
        raise SchemaError(f"{context}: gdpr_applies_param must be boolean or null")
    return ConsentObservation(
        channel=channel,
        raw=str(data["raw"]),
        page_url=str(data.get("page_url", "")),
        request_url=str(request_url) if request_url else None,
        gdpr_applies_param=gdpr,
        timestamp_ms=int(data.get("timestamp_ms", 0)),
    )


def _observation_to_dict(obs: ConsentObservation) -> dict:
    return {
        "channel": obs.channel.value,
        "raw": obs.raw,
        "page_url": obs.page_url,
        "request_url": obs.request_url,
        "gdpr_applies_param": obs.gdpr_applies_param,
        "timestamp_ms": obs.timestamp_ms,
    }


def _request_from_dict(data: dict, context: str) -> RequestLogEntry:
    if "url" not in data:
        raise SchemaError(f"{context}: request entry missing url")
    method = str(data.get("method", "GET")).upper()
    if method not in ("GET", "POST"):
        raise SchemaError(f"{context}: unsupported request method {method!r}")
    return RequestLogEntry(
        url=str(data["url"]),
        method=method,
        third_party=bool(data.get("third_party", True)),
    )


def _annotation_from_dict(data: dict, context: str) -> BannerAnnotation:
    try:
        state = BannerState(data["banner_state"])
    except KeyError:
        raise SchemaError(f"{context}: annotation missing banner_state")
    except ValueError:
        raise SchemaError(f"{context}: unknown banner_state {data['banner_state']!r}")
    return BannerAnnotation(
        banner_state=state,
        opt_out_possible=data.get("opt_out_possible"),
        pre_selected=data.get("pre_selected"),
        operator=str(data.get("operator", "")),
    )


def _annotation_to_dict(ann: BannerAnnotation) -> dict:
    return {
        "banner_state": ann.banner_state.value,
        "opt_out_possible": ann.opt_out_possible,
        "pre_selected": ann.pre_selected,
        "operator": ann.operator,
    }


def record_from_dict(data: dict) -> SessionRecord:
    """Build a SessionRecord from its wire dict, enforcing the schema
    invariants. Raises SchemaError."""
    if not isinstance(data, dict):
        raise SchemaError("record must be a JSON object")
    if "domain" not in data or not data["domain"]:
        raise SchemaError("record missing domain")
    domain = str(data["domain"])
    if "tcf_banner_detected" not in data:
        raise SchemaError(f"{domain}: missing tcf_banner_detected")

    phases: dict[Phase, PhaseCapture] = {}
    for key, raw_phase in (data.get("phases") or {}).items():
        try:
            phase = Phase(key)
        except ValueError:
            raise SchemaError(f"{domain}: unknown phase {key!r}")
        context = f"{domain}/{key}"
        observations = tuple(
            _observation_from_dict(o, context)
            for o in raw_phase.get("observations", ())
        )
        requests = tuple(
            _request_from_dict(r, context) for r in raw_phase.get("requests", ())
        )
        phases[phase] = PhaseCapture(observations=observations, requests=requests)

    annotations = tuple(
        _annotation_from_dict(a, domain) for a in data.get("annotations", ())
    )

    probe = None
    raw_probe = data.get("shared_cookie_probe")
    if raw_probe is not None:
        if "injected_raw" not in raw_probe:
            raise SchemaError(f"{domain}: shared_cookie_probe missing injected_raw")
        probe = SharedCookieProbe(
            injected_raw=str(raw_probe["injected_raw"]),
            returned_raw=raw_probe.get("returned_raw"),
        )

    rank = data.get("tranco_rank")
    record = SessionRecord(
        domain=domain,
        tld=str(data.get("tld") or tld_of(domain)),
        tranco_rank=int(rank) if rank is not None else None,
        tcf_banner_detected=bool(data["tcf_banner_detected"]),
        phases=phases,
        annotations=annotations,
        shared_cookie_probe=probe,
    )
    _check_phase_invariants(record)
    return record


def _check_phase_invariants(record: SessionRecord) -> None:
    has_acted_phase = Phase.AFTER_REFUSE in record.phases or Phase.AFTER_ACCEPT in record.phases
    if not has_acted_phase:
        return
    if not record.annotations:
        raise SchemaError(
            f"{record.domain}: post-action phases require banner annotations"
        )
    resolved = reconcile_annotations(record)
    if resolved.banner_state is not BannerState.PRESENT:
        raise SchemaError(
            f"{record.domain}: post-action phases require a present banner"
        )
    if Phase.AFTER_REFUSE in record.phases and resolved.opt_out_possible is not True:
        raise SchemaError(
            f"{record.domain}: after_refuse phase requires opt_out_possible"
        )


def record_to_dict(record: SessionRecord) -> dict:
    data: dict = {
        "domain": record.domain,
        "tld": record.tld,
        "tranco_rank": record.tranco_rank,
        "tcf_banner_detected": record.tcf_banner_detected,
        "phases": {
            phase.value: {
                "observations": [
                    _observation_to_dict(o) for o in capture.observations
                ],
                "requests": [
                    {"url": r.url, "method": r.method, "third_party": r.third_party}
                    for r in capture.requests
                ],
            }
            for phase, capture in sorted(record.phases.items(), key=lambda kv: kv[0].value)
        },
        "annotations": [_annotation_to_dict(a) for a in record.annotations],
        "shared_cookie_probe": None,
    }
    if record.shared_cookie_probe is not None:
        data["shared_cookie_probe"] = {
            "injected_raw": record.shared_cookie_probe.injected_raw,
            "returned_raw": record.shared_cookie_probe.returned_raw,
        }
    return data


def serialize_sessions(records: Iterable[SessionRecord]) -> str:
    """Deterministic JSON-lines serialization (stable key order)."""
    lines = [
        json.dumps(record_to_dict(r), sort_keys=True, separators=(",", ":"))
        for r in records
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def _recheck_third_party(record: SessionRecord, warnings: list[str]) -> None:
    page_domain = registrable_domain(record.domain)
    for phase, capture in record.phases.items():
        for req in capture.requests:
            derived = registrable_domain(req.url) != page_domain
            if derived != req.third_party:
                message = (
                    f"{record.domain}/{phase.value}: request {req.url} recorded as "
                    f"third_party={req.third_party} but derives to {derived}"
                )
                warnings.append(message)
                log.warning("%s", message)


def load_sessions(source: str | Iterable[str]) -> SessionLoadResult:
    """Parse JSON-lines capture data.

    Invalid lines are reported with their line numbers and skipped;
    loading fails (SchemaError) only when no valid record remains.
    """
    lines = source.splitlines() if isinstance(source, str) else source
    records: list[SessionRecord] = []
    errors: list[LineError] = []
    warnings: list[str] = []
    total = 0
    for line_number, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        total += 1
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            errors.append(LineError(line_number, f"invalid JSON: {exc}"))
            continue
        try:
            record = record_from_dict(payload)
        except SchemaError as exc:
            errors.append(LineError(line_number, str(exc)))
            continue
        _recheck_third_party(record, warnings)
        records.append(record)
    for err in errors:
        log.warning("capture line %d rejected: %s", err.line_number, err.message)
    if total and not records:
        raise SchemaError(
            f"no valid capture records ({len(errors)} invalid line(s))"
        )
    return SessionLoadResult(records=records, errors=errors, warnings=warnings)


def reconcile_annotations(record: SessionRecord) -> BannerAnnotation:
    """Resolve multi-operator annotations to the least-violating view.

    Per field: the banner counts as present if any operator saw it work,
    opt-out counts as possible if any operator found a path, and
    pre-selection stands only when every operator who assessed it saw
    it. Broken wins only when all operators agree the banner was broken.
    """
    if not record.annotations:
        raise NoAnnotations(record.domain)
    annotations = record.annotations

    if any(a.banner_state is BannerState.PRESENT for a in annotations):
        state = BannerState.PRESENT
    elif all(a.banner_state is BannerState.BROKEN for a in annotations):
        state = BannerState.BROKEN
    else:
        state = BannerState.ABSENT

    opt_views = [a.opt_out_possible for a in annotations if a.opt_out_possible is not None]
    if any(opt_views):
        opt_out: bool | None = True
    elif opt_views:
        opt_out = False
    else:
        opt_out = None

    pre_views = [a.pre_selected for a in annotations if a.pre_selected is not None]
    if pre_views and not all(pre_views):
        pre_selected: bool | None = False
    elif pre_views:
        pre_selected = True
    else:
        pre_selected = None

    return BannerAnnotation(
        banner_state=state,
        opt_out_possible=opt_out,
        pre_selected=pre_selected,
        operator="reconciled",
    )


def _operator_violation_kinds(ann: BannerAnnotation) -> frozenset[str]:
    kinds = set()
    if ann.banner_state is BannerState.PRESENT and ann.opt_out_possible is False:
        kinds.add("no_way_to_opt_out")
    if ann.opt_out_possible is True and ann.pre_selected is True:
        kinds.add("pre_selected")
    return frozenset(kinds)


def needs_human_review(record: SessionRecord) -> bool:
    """True when operators assert different violation kinds, the case the
    least-violating rule cannot settle on its own."""
    kind_sets = {
        _operator_violation_kinds(a) for a in record.annotations
    } - {frozenset()}
    return len(kind_sets) > 1
