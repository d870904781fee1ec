"""Shared builders for the test suite: fixture snapshots, random consent
generation, and record construction."""

from __future__ import annotations

import json
import random

from tcfaudit.capture import (
    BannerAnnotation,
    BannerState,
    Channel,
    ConsentObservation,
    Phase,
    PhaseCapture,
    RequestLogEntry,
    SessionRecord,
)
from tcfaudit.codec import Bitfield, ConsentString, Range, encode_consent_string
from tcfaudit.registry import VendorRegistry, load_cmp_list, load_vendor_list

# decoded in the wild from a real banner; the codec's golden vector
FIG3_STRING = "BOX5uluOX5uluCLAAAENB6-AAAAizAAA"

GVL_FIXTURE = {
    "vendorListVersion": 168,
    "vendors": [
        {"id": 1, "name": "Vendor One", "purposeIds": [1, 2], "legIntPurposeIds": []},
        {"id": 2, "name": "Vendor Two", "purposeIds": [1], "legIntPurposeIds": [3]},
        {"id": 3, "name": "Vendor Three", "purposeIds": [3, 4], "legIntPurposeIds": []},
        {"id": 8, "name": "Vendor Eight", "purposeIds": [1, 2, 3, 4, 5], "legIntPurposeIds": []},
        {"id": 9, "name": "LI Only Nine", "purposeIds": [], "legIntPurposeIds": [3]},
        {"id": 10, "name": "LI Only Ten", "purposeIds": [], "legIntPurposeIds": [1, 5]},
        {"id": 12, "name": "Vendor Twelve", "purposeIds": [2, 5], "legIntPurposeIds": [1]},
        {"id": 25, "name": "Vendor TwentyFive", "purposeIds": [5], "legIntPurposeIds": []},
        {"id": 100, "name": "Vendor Hundred", "purposeIds": [1, 3], "legIntPurposeIds": []},
        {"id": 555, "name": "Vendor 555", "purposeIds": [2], "legIntPurposeIds": []},
        {"id": 556, "name": "Vendor 556", "purposeIds": [4], "legIntPurposeIds": []},
        {"id": 670, "name": "Vendor 670", "purposeIds": [1], "legIntPurposeIds": []},
    ],
}

CMP_FIXTURE = {
    "cmps": [
        {"id": 2, "name": "First Consent Co"},
        {"id": 6, "name": "BannerWare"},
        {"id": 10, "name": "ConsentHub"},
        {"id": 45, "name": "ChoiceLayer"},
        {"id": 139, "name": "Telemetry Consent SA"},
        {"id": 200, "name": "OptBox"},
        {"id": 265, "name": "LastListed CMP"},
    ]
}

DISCONNECT_FIXTURE = {
    "categories": {
        "Advertising": [
            {"TrackCorp": {"https://trackcorp.example/": ["track-one.example", "trackcorp.net"]}},
            {"PixelWorks": {"https://pixelworks.example/": ["track-two.example"]}},
        ],
        "Analytics": [
            {"MeasureIt": {"https://measureit.example/": ["a.tracker.example"]}},
        ],
    }
}


def fixture_registry() -> VendorRegistry:
    registry = VendorRegistry()
    load_vendor_list(json.dumps(GVL_FIXTURE), registry)
    load_cmp_list(json.dumps(CMP_FIXTURE), registry)
    return registry


def random_consent(rng: random.Random) -> ConsentString:
    """A valid ConsentString with a concrete vendor encoding."""
    max_vendor = rng.randint(0, 700)
    if max_vendor:
        count = rng.randint(0, max_vendor)
        vendors = frozenset(rng.sample(range(1, max_vendor + 1), count))
    else:
        vendors = frozenset()
    purposes = frozenset(p for p in range(1, 25) if rng.random() < 0.25)

    if rng.random() < 0.5:
        encoding: Bitfield | Range = Bitfield()
    else:
        default = rng.random() < 0.5
        base = (
            set(range(1, max_vendor + 1)) - set(vendors) if default else set(vendors)
        )
        entries = []
        for v in sorted(base):
            if entries and v == entries[-1][1] + 1:
                entries[-1] = (entries[-1][0], v)
            else:
                entries.append((v, v))
        encoding = Range(default_consent=default, entries=tuple(entries))

    language = rng.choice(["EN", "FR", "DE", "IT", "PL"])
    return ConsentString(
        created=rng.getrandbits(36),
        last_updated=rng.getrandbits(36),
        cmp_id=rng.randrange(4096),
        cmp_version=rng.randrange(4096),
        consent_screen=rng.randrange(64),
        consent_language=language,
        vendor_list_version=rng.randrange(4096),
        allowed_purposes=purposes,
        max_vendor_id=max_vendor,
        allowed_vendors=vendors,
        vendor_encoding=encoding,
    )


def consent_raw(
    purposes: set[int] | frozenset[int],
    vendors: set[int] | frozenset[int],
    cmp_id: int = 139,
    max_vendor_id: int | None = None,
) -> str:
    max_id = max_vendor_id if max_vendor_id is not None else (max(vendors) if vendors else 0)
    return encode_consent_string(
        ConsentString(
            created=15_600_000_000,
            last_updated=15_600_000_000,
            cmp_id=cmp_id,
            vendor_list_version=168,
            allowed_purposes=frozenset(purposes),
            max_vendor_id=max_id,
            allowed_vendors=frozenset(vendors),
        )
    )


def obs(
    channel: Channel,
    raw: str,
    page: str = "https://www.site.example/",
    gdpr: bool | None = None,
) -> ConsentObservation:
    request_url = None
    if channel in (Channel.URL_GET, Channel.URL_POST):
        request_url = f"https://ads.example/px?gdpr_consent={raw}"
    return ConsentObservation(
        channel=channel,
        raw=raw,
        page_url=page,
        request_url=request_url,
        gdpr_applies_param=gdpr,
        timestamp_ms=1_560_000_000_000,
    )


def annotation(
    opt_out: bool | None = True,
    pre_selected: bool | None = False,
    state: BannerState = BannerState.PRESENT,
    operator: str = "op-1",
) -> BannerAnnotation:
    return BannerAnnotation(
        banner_state=state,
        opt_out_possible=opt_out,
        pre_selected=pre_selected,
        operator=operator,
    )


def record(
    domain: str = "site.example",
    banner: bool = True,
    no_action: tuple[ConsentObservation, ...] = (),
    after_refuse: tuple[ConsentObservation, ...] | None = None,
    after_accept: tuple[ConsentObservation, ...] | None = None,
    annotations: tuple[BannerAnnotation, ...] = (),
    requests: dict[Phase, tuple[RequestLogEntry, ...]] | None = None,
    probe=None,
    rank: int | None = None,
) -> SessionRecord:
    requests = requests or {}
    phases = {
        Phase.NO_ACTION: PhaseCapture(
            observations=no_action, requests=requests.get(Phase.NO_ACTION, ())
        )
    }
    if after_refuse is not None:
        phases[Phase.AFTER_REFUSE] = PhaseCapture(
            observations=after_refuse, requests=requests.get(Phase.AFTER_REFUSE, ())
        )
    if after_accept is not None:
        phases[Phase.AFTER_ACCEPT] = PhaseCapture(
            observations=after_accept, requests=requests.get(Phase.AFTER_ACCEPT, ())
        )
    return SessionRecord(
        domain=domain,
        tld=domain.rsplit(".", 1)[-1],
        tranco_rank=rank,
        tcf_banner_detected=banner,
        phases=phases,
        annotations=annotations,
        shared_cookie_probe=probe,
    )
