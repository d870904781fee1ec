"""Deterministic corpus simulator with violation injection.

Every injected violation is realized in the produced observations and
annotations, and the returned manifest lists exactly the finding kinds
the detection engine must report per site: the manifest is the oracle.
Non-injected sites are compliant (empty or action-consistent consent
strings). Identical (seed, plan, registry) inputs produce byte-identical
serialized corpora; all timestamps derive from the seed, never from the
clock.

Injection closure: a shared-cookie violation is also, by definition, a
violation over the API channels (the shared cookie is one of them), so
injecting the shared-cookie kinds adds the corresponding base kind to
the manifest as well.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, fields as dataclass_fields

from ..capture import (
    BannerAnnotation,
    BannerState,
    Channel,
    ConsentObservation,
    Phase,
    PhaseCapture,
    RequestLogEntry,
    SessionRecord,
    SharedCookieProbe,
)
from ..codec import ConsentString, encode_consent_string
from ..engine import ViolationKind
from ..registry import VendorRegistry

__all__ = ["InvalidPlan", "SiteSpec", "SimulationPlan", "simulate_corpus"]

_BASE_TIME_DS = 15_600_000_000  # fixed epoch deciseconds for generated strings


class InvalidPlan(ValueError):
    """The simulation plan asks for an impossible or ambiguous corpus."""


_ANNOTATION_KINDS = {
    ViolationKind.NO_WAY_TO_OPT_OUT.value,
    ViolationKind.PRE_SELECTED.value,
}
_REFUSAL_KINDS = {
    ViolationKind.NON_RESPECT_OF_CHOICE.value,
    ViolationKind.SHARED_COOKIE_NON_RESPECT.value,
    ViolationKind.URL_ONLY_NON_RESPECT.value,
}
_KIND_VALUES = {k.value for k in ViolationKind}


@dataclass
class SiteSpec:
    """What one simulated site should exhibit."""

    kinds: list[str] = field(default_factory=list)
    tld: str = "example"
    domain: str | None = None
    purposes: int = 5  # purposes granted by injected positive strings
    channel: str = Channel.CMP_FUNCTION.value  # API channel for injections
    annotated: bool = False
    broken_banner: bool = False
    banner: bool = True
    operators: int = 1
    conflict_opt_out: bool = False  # one operator misses the opt-out path
    url_echo: bool = False  # mirror API strings onto the URL channel
    cmp_id: int | None = None
    url_cmp_id: int | None = None  # URL-channel CMP for mismatch injection
    invalid_cmp_id: int = 1
    subthreshold_refusal: int = 0  # 1..4 purposes stored after refusal
    no_consent_string: bool = False
    undecodable: bool = False
    li_only_string: bool = False  # positive string, legitimate-interest-only vendors
    empty_vendors_string: bool = False  # positive purposes, empty vendor set
    probe: str | None = None  # None, "reused" or "ignored"
    tracker_requests: dict[str, int] = field(default_factory=dict)
    extra_requests: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            f.name: getattr(self, f.name)
            for f in dataclass_fields(self)
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SiteSpec":
        known = {f.name for f in dataclass_fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidPlan(f"unknown site fields: {sorted(unknown)}")
        return cls(**data)


@dataclass
class SimulationPlan:
    seed: int
    sites: list[SiteSpec]
    tracker_domains: list[str] = field(
        default_factory=lambda: ["track-one.example", "track-two.example"]
    )
    plain_domain: str = "cdn-assets.example"

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "tracker_domains": self.tracker_domains,
            "plain_domain": self.plain_domain,
            "sites": [s.to_dict() for s in self.sites],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimulationPlan":
        if "seed" not in data:
            raise InvalidPlan("plan missing seed")
        if "sites" in data:
            sites = [SiteSpec.from_dict(s) for s in data["sites"]]
        elif "site_count" in data:
            sites = [SiteSpec() for _ in range(int(data["site_count"]))]
            for injection in data.get("inject", ()):
                injection = dict(injection)
                index = injection.pop("site", None)
                if index is None or not 0 <= index < len(sites):
                    raise InvalidPlan(f"inject entry with bad site index: {index}")
                sites[index] = SiteSpec.from_dict(injection)
        else:
            raise InvalidPlan("plan needs either sites or site_count")
        plan = cls(seed=int(data["seed"]), sites=sites)
        if "tracker_domains" in data:
            plan.tracker_domains = list(data["tracker_domains"])
        if "plain_domain" in data:
            plan.plain_domain = str(data["plain_domain"])
        return plan


def _validate_spec(index: int, spec: SiteSpec, registry: VendorRegistry) -> None:
    where = f"site {index}"
    unknown = set(spec.kinds) - _KIND_VALUES
    if unknown:
        raise InvalidPlan(f"{where}: unknown kinds {sorted(unknown)}")
    kinds = set(spec.kinds)
    if not 1 <= spec.purposes <= 5:
        raise InvalidPlan(f"{where}: purposes must be 1..5")
    if spec.subthreshold_refusal and not 1 <= spec.subthreshold_refusal <= 4:
        raise InvalidPlan(f"{where}: subthreshold_refusal must be 1..4")
    if ViolationKind.NO_WAY_TO_OPT_OUT.value in kinds and kinds & (
        _REFUSAL_KINDS | {ViolationKind.PRE_SELECTED.value}
    ):
        raise InvalidPlan(
            f"{where}: refusal-based kinds need a banner that can be refused"
        )
    if spec.broken_banner and (kinds & (_ANNOTATION_KINDS | _REFUSAL_KINDS)):
        raise InvalidPlan(f"{where}: a broken banner supports no banner-based kinds")
    if ViolationKind.URL_ONLY_BEFORE_CHOICE.value in kinds and (
        kinds
        & {
            ViolationKind.CONSENT_BEFORE_CHOICE.value,
            ViolationKind.SHARED_COOKIE_BEFORE_CHOICE.value,
        }
        or spec.url_echo
    ):
        raise InvalidPlan(
            f"{where}: url-only violations exclude API-channel counterparts"
        )
    if ViolationKind.URL_ONLY_NON_RESPECT.value in kinds and (
        kinds
        & {
            ViolationKind.NON_RESPECT_OF_CHOICE.value,
            ViolationKind.SHARED_COOKIE_NON_RESPECT.value,
        }
        or spec.url_echo
    ):
        raise InvalidPlan(
            f"{where}: url-only violations exclude API-channel counterparts"
        )
    if ViolationKind.NON_RESPECT_OF_CHOICE.value in kinds and spec.subthreshold_refusal:
        raise InvalidPlan(f"{where}: cannot be both violating and sub-threshold")
    if spec.invalid_cmp_id not in registry.invalid_cmp_ids and (
        ViolationKind.INVALID_CMP_ID.value in kinds
    ):
        raise InvalidPlan(
            f"{where}: invalid_cmp_id {spec.invalid_cmp_id} is not in the "
            f"registry's invalid set"
        )
    if ViolationKind.NONEXISTENT_VENDORS.value in kinds and not registry.vendors:
        raise InvalidPlan(f"{where}: nonexistent-vendor injection needs a vendor list")
    if spec.no_consent_string and kinds - _ANNOTATION_KINDS:
        raise InvalidPlan(
            f"{where}: consent-string kinds need the CMP to answer with a string"
        )
    if not spec.banner and kinds:
        raise InvalidPlan(f"{where}: injections need a TCF banner site")


def _manifest_kinds(spec: SiteSpec) -> list[str]:
    kinds = set(spec.kinds)
    if ViolationKind.SHARED_COOKIE_BEFORE_CHOICE.value in kinds:
        kinds.add(ViolationKind.CONSENT_BEFORE_CHOICE.value)
    if ViolationKind.SHARED_COOKIE_NON_RESPECT.value in kinds:
        kinds.add(ViolationKind.NON_RESPECT_OF_CHOICE.value)
    return sorted(kinds)


class _SiteBuilder:
    def __init__(
        self,
        index: int,
        spec: SiteSpec,
        plan: SimulationPlan,
        registry: VendorRegistry,
    ):
        self.index = index
        self.spec = spec
        self.plan = plan
        self.registry = registry
        self.rng = random.Random(f"{plan.seed}:{index}")
        self.domain = spec.domain or f"site-{index:05d}.{spec.tld}"
        self.page_url = f"https://www.{self.domain}/"
        self.base_ms = 1_560_000_000_000 + index * 60_000
        self._consent_vendor_pool = sorted(
            v.id
            for v in registry.vendors.values()
            if v.consent_purposes & set(range(1, 6))
        )
        self._li_only_pool = sorted(
            v.id
            for v in registry.vendors.values()
            if not v.consent_purposes and v.legitimate_interest_purposes
        )
        self.cmp_id = spec.cmp_id
        if self.cmp_id is None:
            pool = sorted(registry.cmps) or [42]
            self.cmp_id = pool[self.rng.randrange(len(pool))]

    # -- consent string construction -------------------------------------

    def _string(
        self,
        purposes: int,
        vendors: tuple[int, ...] | None = None,
        cmp_id: int | None = None,
        max_vendor_id: int | None = None,
    ) -> str:
        if vendors is None:
            if purposes and self._consent_vendor_pool:
                pool = self._consent_vendor_pool
                vendors = tuple(
                    sorted(self.rng.sample(pool, k=min(3, len(pool))))
                )
            else:
                vendors = ()
        max_id = max_vendor_id or self.registry.max_vendor_id or 600
        if vendors:
            max_id = max(max_id, max(vendors))
        consent = ConsentString(
            created=_BASE_TIME_DS + self.index * 600,
            last_updated=_BASE_TIME_DS + self.index * 600,
            cmp_id=self.cmp_id if cmp_id is None else cmp_id,
            cmp_version=1,
            consent_screen=1,
            consent_language="EN",
            vendor_list_version=max(self.registry.gvl_version, 1),
            allowed_purposes=frozenset(range(1, purposes + 1)),
            max_vendor_id=max_id,
            allowed_vendors=frozenset(vendors),
        )
        return encode_consent_string(consent)

    def _empty_string(self, cmp_id: int | None = None) -> str:
        return self._string(0, vendors=(), cmp_id=cmp_id)

    def _li_only_string(self) -> str:
        if not self._li_only_pool:
            raise InvalidPlan(
                f"site {self.index}: registry has no legitimate-interest-only vendor"
            )
        vendors = (self._li_only_pool[0],)
        return self._string(self.spec.purposes, vendors=vendors)

    def _nonexistent_vendor_string(self) -> str:
        beyond = self.registry.max_vendor_id + 10
        return self._string(
            0,
            vendors=tuple(range(1, beyond + 1)),
            max_vendor_id=beyond,
        )

    # -- observations -----------------------------------------------------

    def _observation(
        self, channel: Channel, raw: str, offset_ms: int, gdpr: bool | None = None
    ) -> ConsentObservation:
        request_url = None
        if channel in (Channel.URL_GET, Channel.URL_POST):
            request_url = (
                f"https://pixel.adnetwork.example/sync?gdpr=1&gdpr_consent={raw}"
            )
        return ConsentObservation(
            channel=channel,
            raw=raw,
            page_url=self.page_url,
            request_url=request_url,
            gdpr_applies_param=gdpr,
            timestamp_ms=self.base_ms + offset_ms,
        )

    def _requests(self, phase_key: str) -> tuple[RequestLogEntry, ...]:
        tracking = self.spec.tracker_requests.get(phase_key, 0)
        extra = self.spec.extra_requests.get(phase_key, 0)
        entries = []
        trackers = self.plan.tracker_domains
        for i in range(tracking):
            host = trackers[i % len(trackers)]
            entries.append(
                RequestLogEntry(
                    url=f"https://sub{i}.{host}/collect?i={i}",
                    method="GET",
                    third_party=True,
                )
            )
        for i in range(extra):
            entries.append(
                RequestLogEntry(
                    url=f"https://{self.plan.plain_domain}/static/{i}.js",
                    method="GET",
                    third_party=True,
                )
            )
        return tuple(entries)

    # -- phases -----------------------------------------------------------

    def _api_channel(self) -> Channel:
        channel = Channel(self.spec.channel)
        if channel in (Channel.URL_GET, Channel.URL_POST):
            raise InvalidPlan(
                f"site {self.index}: API injections cannot use a URL channel"
            )
        return channel

    def _no_action_observations(self) -> list[ConsentObservation]:
        spec, kinds = self.spec, set(self.spec.kinds)
        observations: list[ConsentObservation] = []
        if spec.no_consent_string:
            pass
        elif ViolationKind.CONSENT_BEFORE_CHOICE.value in kinds:
            raw = self._string(spec.purposes)
            observations.append(self._observation(self._api_channel(), raw, 10))
            if spec.url_echo:
                observations.append(self._observation(Channel.URL_GET, raw, 20))
        elif spec.li_only_string:
            observations.append(
                self._observation(self._api_channel(), self._li_only_string(), 10)
            )
        elif spec.empty_vendors_string:
            raw = self._string(spec.purposes, vendors=())
            observations.append(self._observation(self._api_channel(), raw, 10))
        else:
            observations.append(
                self._observation(Channel.CMP_FUNCTION, self._empty_string(), 10)
            )

        if ViolationKind.SHARED_COOKIE_BEFORE_CHOICE.value in kinds:
            observations.append(
                self._observation(
                    Channel.SHARED_COOKIE, self._string(spec.purposes), 30
                )
            )
        if ViolationKind.URL_ONLY_BEFORE_CHOICE.value in kinds:
            observations.append(
                self._observation(Channel.URL_GET, self._string(spec.purposes), 40)
            )
        if ViolationKind.CMP_ID_MISMATCH.value in kinds:
            url_cmp = self.spec.url_cmp_id
            if url_cmp is None:
                candidates = [c for c in sorted(self.registry.cmps) if c != self.cmp_id]
                if not candidates:
                    raise InvalidPlan(
                        f"site {self.index}: mismatch injection needs two known CMPs"
                    )
                url_cmp = candidates[self.rng.randrange(len(candidates))]
            observations.append(
                self._observation(
                    Channel.URL_POST, self._empty_string(cmp_id=url_cmp), 50
                )
            )
        if ViolationKind.INVALID_CMP_ID.value in kinds:
            observations.append(
                self._observation(
                    Channel.URL_GET,
                    self._empty_string(cmp_id=spec.invalid_cmp_id),
                    60,
                    gdpr=True,
                )
            )
        if ViolationKind.NONEXISTENT_VENDORS.value in kinds:
            observations.append(
                self._observation(
                    self._api_channel(), self._nonexistent_vendor_string(), 70
                )
            )
        if spec.undecodable:
            observations.append(
                self._observation(Channel.CMP_FUNCTION, "?corrupted-capture?", 80)
            )
        return observations

    def _after_refuse_observations(self) -> list[ConsentObservation]:
        spec, kinds = self.spec, set(self.spec.kinds)
        observations: list[ConsentObservation] = []
        if ViolationKind.NON_RESPECT_OF_CHOICE.value in kinds:
            raw = self._string(5)
            observations.append(self._observation(self._api_channel(), raw, 110))
            if spec.url_echo:
                observations.append(self._observation(Channel.URL_GET, raw, 120))
        elif spec.subthreshold_refusal:
            observations.append(
                self._observation(
                    self._api_channel(), self._string(spec.subthreshold_refusal), 110
                )
            )
        elif not spec.no_consent_string:
            observations.append(
                self._observation(Channel.CMP_FUNCTION, self._empty_string(), 110)
            )
        if ViolationKind.SHARED_COOKIE_NON_RESPECT.value in kinds:
            observations.append(
                self._observation(Channel.SHARED_COOKIE, self._string(5), 130)
            )
        if ViolationKind.URL_ONLY_NON_RESPECT.value in kinds:
            observations.append(
                self._observation(Channel.URL_GET, self._string(5), 140)
            )
        return observations

    def _annotations(self) -> tuple[BannerAnnotation, ...]:
        spec, kinds = self.spec, set(self.spec.kinds)
        if spec.broken_banner:
            return tuple(
                BannerAnnotation(BannerState.BROKEN, operator=f"op-{i + 1}")
                for i in range(spec.operators)
            )
        opt_out = ViolationKind.NO_WAY_TO_OPT_OUT.value not in kinds
        pre_selected = ViolationKind.PRE_SELECTED.value in kinds
        annotations = [
            BannerAnnotation(
                BannerState.PRESENT,
                opt_out_possible=opt_out,
                pre_selected=pre_selected,
                operator=f"op-{i + 1}",
            )
            for i in range(spec.operators)
        ]
        if spec.conflict_opt_out and opt_out:
            # one operator missed the opt-out path; least-violating wins
            annotations[0] = BannerAnnotation(
                BannerState.PRESENT,
                opt_out_possible=False,
                pre_selected=pre_selected,
                operator="op-1",
            )
            if len(annotations) == 1:
                annotations.append(
                    BannerAnnotation(
                        BannerState.PRESENT,
                        opt_out_possible=True,
                        pre_selected=pre_selected,
                        operator="op-2",
                    )
                )
        return tuple(annotations)

    def build(self) -> SessionRecord:
        spec, kinds = self.spec, set(self.spec.kinds)
        annotated = (
            spec.annotated
            or spec.broken_banner
            or bool(kinds & (_ANNOTATION_KINDS | _REFUSAL_KINDS))
            or bool(spec.subthreshold_refusal)
        )
        annotations = self._annotations() if annotated else ()
        phases = {
            Phase.NO_ACTION: PhaseCapture(
                observations=tuple(self._no_action_observations()),
                requests=self._requests(Phase.NO_ACTION.value),
            )
        }
        if annotations and not spec.broken_banner:
            opt_out = ViolationKind.NO_WAY_TO_OPT_OUT.value not in kinds
            if opt_out:
                phases[Phase.AFTER_REFUSE] = PhaseCapture(
                    observations=tuple(self._after_refuse_observations()),
                    requests=self._requests(Phase.AFTER_REFUSE.value),
                )
            accept_obs = (
                ()
                if spec.no_consent_string
                else (self._observation(Channel.CMP_FUNCTION, self._string(5), 210),)
            )
            phases[Phase.AFTER_ACCEPT] = PhaseCapture(
                observations=accept_obs,
                requests=self._requests(Phase.AFTER_ACCEPT.value),
            )

        probe = None
        if spec.probe is not None:
            injected = self._string(2)
            if spec.probe == "reused":
                probe = SharedCookieProbe(injected_raw=injected, returned_raw=injected)
            elif spec.probe == "ignored":
                probe = SharedCookieProbe(injected_raw=injected, returned_raw=None)
            else:
                raise InvalidPlan(
                    f"site {self.index}: probe must be 'reused' or 'ignored'"
                )

        return SessionRecord(
            domain=self.domain,
            tld=spec.tld,
            tranco_rank=self.index + 1,
            tcf_banner_detected=spec.banner,
            phases=phases,
            annotations=annotations,
            shared_cookie_probe=probe,
        )


def simulate_corpus(
    plan: SimulationPlan, registry: VendorRegistry
) -> tuple[list[SessionRecord], dict[str, list[str]]]:
    """Produce (records, manifest) for a plan.

    The manifest maps each domain to the sorted finding kinds the engine
    must report for it; compliant sites are present with an empty list.
    """
    if not plan.sites:
        raise InvalidPlan("plan has no sites")
    records = []
    manifest: dict[str, list[str]] = {}
    for index, spec in enumerate(plan.sites):
        _validate_spec(index, spec, registry)
        builder = _SiteBuilder(index, spec, plan, registry)
        record = builder.build()
        records.append(record)
        manifest[record.domain] = _manifest_kinds(spec)
    if len(manifest) != len(records):
        raise InvalidPlan("duplicate domains in plan")
    return records, manifest
