"""Vendor and CMP registry: GVL snapshots, CMP list, purpose catalog.

Audits run offline against pinned JSON snapshots. The registry is built
once and treated as immutable afterwards, so it can be shared freely
across worker threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from .codec import ConsentString, TCF_PURPOSE_IDS

__all__ = [
    "SchemaError",
    "DuplicateId",
    "Vendor",
    "Cmp",
    "Purpose",
    "CmpStatus",
    "CmpIdentity",
    "VendorRegistry",
    "DEFAULT_INVALID_CMP_IDS",
    "default_purposes",
    "load_vendor_list",
    "load_cmp_list",
    "load_purposes",
    "identify_cmp",
    "has_consent_based_vendor",
]

DEFAULT_INVALID_CMP_IDS = frozenset({0, 1, 4095})


class SchemaError(ValueError):
    """A snapshot document is missing a required field or is malformed."""


class DuplicateId(SchemaError):
    """A snapshot document declares the same id twice."""


@dataclass(frozen=True)
class Vendor:
    id: int
    name: str
    consent_purposes: frozenset[int]
    legitimate_interest_purposes: frozenset[int]


@dataclass(frozen=True)
class Cmp:
    id: int
    name: str


@dataclass(frozen=True)
class Purpose:
    id: int
    name: str
    description: str


class CmpStatus(Enum):
    KNOWN = "known"
    INVALID = "invalid"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class CmpIdentity:
    """Result of resolving a CMP id against the registry."""

    status: CmpStatus
    cmp_id: int
    name: str | None = None

    @property
    def label(self) -> str:
        if self.status is CmpStatus.KNOWN:
            return self.name or f"cmp-{self.cmp_id}"
        return self.status.value


# The five purposes defined for TCF v1.1 banners. Descriptions abridged;
# an override file can replace the whole catalog.
_PURPOSES = (
    Purpose(1, "Information storage and access",
            "Storage of, or access to, information already stored on the "
            "device, such as advertising identifiers, device identifiers, "
            "cookies, and similar technologies."),
    Purpose(2, "Personalisation",
            "Collection and processing of information about use of this "
            "service to subsequently personalise advertising and/or content "
            "in other contexts, such as other websites or apps, over time."),
    Purpose(3, "Ad selection, delivery, reporting",
            "Collection of information, combined with previously collected "
            "information, to select and deliver advertisements, and to "
            "measure their delivery and effectiveness."),
    Purpose(4, "Content selection, delivery, reporting",
            "Collection of information, combined with previously collected "
            "information, to select and deliver content, and to measure its "
            "delivery and effectiveness."),
    Purpose(5, "Measurement",
            "Collection of information about use of the content, combined "
            "with previously collected information, to measure, understand "
            "and report on usage of the service."),
)


def default_purposes() -> dict[int, Purpose]:
    return {p.id: p for p in _PURPOSES}


@dataclass
class VendorRegistry:
    gvl_version: int = 0
    vendors: dict[int, Vendor] = field(default_factory=dict)
    cmps: dict[int, Cmp] = field(default_factory=dict)
    purposes: dict[int, Purpose] = field(default_factory=default_purposes)
    invalid_cmp_ids: frozenset[int] = DEFAULT_INVALID_CMP_IDS

    @property
    def max_vendor_id(self) -> int:
        return max(self.vendors) if self.vendors else 0


def _require(obj: dict, key: str, context: str):
    if key not in obj:
        raise SchemaError(f"{context}: missing required field {key!r}")
    return obj[key]


def _parse_json(document: str, context: str) -> dict:
    try:
        parsed = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{context}: not valid JSON: {exc}") from exc
    if not isinstance(parsed, dict):
        raise SchemaError(f"{context}: expected a JSON object")
    return parsed


def load_vendor_list(document: str, registry: VendorRegistry | None = None) -> VendorRegistry:
    """Load a Global Vendor List snapshot into a registry.

    Expected shape: {"vendorListVersion": int,
                     "vendors": [{"id", "name", "purposeIds", "legIntPurposeIds"}]}.
    Unknown extra fields are ignored.
    """
    registry = registry if registry is not None else VendorRegistry()
    data = _parse_json(document, "vendor list")
    version = _require(data, "vendorListVersion", "vendor list")
    raw_vendors = _require(data, "vendors", "vendor list")
    if not isinstance(raw_vendors, list):
        raise SchemaError("vendor list: vendors must be an array")

    vendors: dict[int, Vendor] = {}
    for i, entry in enumerate(raw_vendors):
        context = f"vendor list entry {i}"
        if not isinstance(entry, dict):
            raise SchemaError(f"{context}: expected an object")
        vendor_id = _require(entry, "id", context)
        if not isinstance(vendor_id, int) or vendor_id < 1:
            raise SchemaError(f"{context}: id must be a positive integer")
        if vendor_id in vendors:
            raise DuplicateId(f"{context}: duplicate vendor id {vendor_id}")
        vendors[vendor_id] = Vendor(
            id=vendor_id,
            name=str(entry.get("name", f"vendor-{vendor_id}")),
            consent_purposes=frozenset(entry.get("purposeIds", ())),
            legitimate_interest_purposes=frozenset(entry.get("legIntPurposeIds", ())),
        )

    registry.gvl_version = int(version)
    registry.vendors = vendors
    return registry


def load_cmp_list(document: str, registry: VendorRegistry | None = None) -> VendorRegistry:
    """Load a CMP list snapshot: {"cmps": [{"id", "name"}]} or the
    map-shaped variant {"cmps": {"<id>": {"id", "name"}}}."""
    registry = registry if registry is not None else VendorRegistry()
    data = _parse_json(document, "cmp list")
    raw = _require(data, "cmps", "cmp list")
    if isinstance(raw, dict):
        entries = list(raw.values())
    elif isinstance(raw, list):
        entries = raw
    else:
        raise SchemaError("cmp list: cmps must be an array or object")

    cmps: dict[int, Cmp] = {}
    for i, entry in enumerate(entries):
        context = f"cmp list entry {i}"
        if not isinstance(entry, dict):
            raise SchemaError(f"{context}: expected an object")
        cmp_id = _require(entry, "id", context)
        if not isinstance(cmp_id, int) or cmp_id < 0:
            raise SchemaError(f"{context}: id must be a non-negative integer")
        if cmp_id in cmps:
            raise DuplicateId(f"{context}: duplicate CMP id {cmp_id}")
        cmps[cmp_id] = Cmp(id=cmp_id, name=str(entry.get("name", f"cmp-{cmp_id}")))

    registry.cmps = cmps
    return registry


def load_purposes(document: str, registry: VendorRegistry | None = None) -> VendorRegistry:
    """Replace the built-in purpose catalog from an override file:
    {"purposes": [{"id", "name", "description"}]}."""
    registry = registry if registry is not None else VendorRegistry()
    data = _parse_json(document, "purposes")
    raw = _require(data, "purposes", "purposes")
    purposes: dict[int, Purpose] = {}
    for i, entry in enumerate(raw):
        context = f"purposes entry {i}"
        purpose_id = _require(entry, "id", context)
        if purpose_id in purposes:
            raise DuplicateId(f"{context}: duplicate purpose id {purpose_id}")
        purposes[purpose_id] = Purpose(
            id=purpose_id,
            name=str(_require(entry, "name", context)),
            description=str(entry.get("description", "")),
        )
    registry.purposes = purposes
    return registry


def identify_cmp(cmp_id: int, registry: VendorRegistry) -> CmpIdentity:
    """Classify a CMP id as Known, Invalid or Unknown.

    Invalid ids (default {0, 1, 4095}) take precedence even if a list
    erroneously contains them.
    """
    if cmp_id in registry.invalid_cmp_ids:
        return CmpIdentity(CmpStatus.INVALID, cmp_id)
    cmp = registry.cmps.get(cmp_id)
    if cmp is not None:
        return CmpIdentity(CmpStatus.KNOWN, cmp_id, cmp.name)
    return CmpIdentity(CmpStatus.UNKNOWN, cmp_id)


def has_consent_based_vendor(consent: ConsentString, registry: VendorRegistry) -> bool:
    """True when at least one allowed vendor relies on consent for one of
    the allowed TCF purposes.

    Vendors absent from the registry count as consent-based: for an audit
    tool, under-counting suspected violations is the worse failure mode.
    False whenever the vendor set is empty.
    """
    purposes = consent.allowed_purposes & TCF_PURPOSE_IDS
    for vendor_id in consent.allowed_vendors:
        vendor = registry.vendors.get(vendor_id)
        if vendor is None:
            return True
        if vendor.consent_purposes & purposes:
            return True
    return False
