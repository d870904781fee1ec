"""Registry tests: snapshot loading, CMP identification, consent-basis
filtering with a brute-force oracle."""

import json
import random

import pytest

from helpers import CMP_FIXTURE, GVL_FIXTURE, fixture_registry
from tcfaudit.codec import ConsentString
from tcfaudit.registry import (
    CmpStatus,
    DuplicateId,
    SchemaError,
    Vendor,
    VendorRegistry,
    default_purposes,
    has_consent_based_vendor,
    identify_cmp,
    load_cmp_list,
    load_purposes,
    load_vendor_list,
)


class TestVendorList:
    def test_direct_field_mapping(self):
        doc = json.dumps(
            {
                "vendorListVersion": 5,
                "vendors": [
                    {"id": 8, "name": "Eight", "purposeIds": [1, 2], "legIntPurposeIds": [3]}
                ],
            }
        )
        registry = load_vendor_list(doc)
        assert registry.gvl_version == 5
        assert registry.vendors[8].consent_purposes == frozenset({1, 2})
        assert registry.vendors[8].legitimate_interest_purposes == frozenset({3})

    def test_empty_vendor_array_is_valid(self):
        registry = load_vendor_list(json.dumps({"vendorListVersion": 1, "vendors": []}))
        assert registry.vendors == {}
        assert registry.max_vendor_id == 0

    def test_duplicate_ids_rejected(self):
        vendors = [
            {"id": i, "name": f"v{i}", "purposeIds": [1], "legIntPurposeIds": []}
            for i in (1, 2, 3, 4, 5, 6, 7, 8, 9)
        ]
        vendors.append({"id": 4, "name": "dup", "purposeIds": [], "legIntPurposeIds": []})
        doc = json.dumps({"vendorListVersion": 1, "vendors": vendors})
        with pytest.raises(DuplicateId):
            load_vendor_list(doc)

    def test_missing_required_field(self):
        with pytest.raises(SchemaError):
            load_vendor_list(json.dumps({"vendors": []}))
        with pytest.raises(SchemaError):
            load_vendor_list(json.dumps({"vendorListVersion": 1}))
        with pytest.raises(SchemaError):
            load_vendor_list("not json at all")

    def test_unknown_fields_ignored(self):
        doc = json.dumps(
            {
                "vendorListVersion": 2,
                "lastUpdated": "2019-09-18",
                "vendors": [
                    {"id": 3, "name": "x", "purposeIds": [], "legIntPurposeIds": [], "policyUrl": "https://x"}
                ],
            }
        )
        assert load_vendor_list(doc).vendors[3].name == "x"


class TestCmpList:
    def test_array_shape(self):
        registry = load_cmp_list(json.dumps(CMP_FIXTURE))
        assert registry.cmps[139].name == "Telemetry Consent SA"

    def test_map_shape_variant(self):
        doc = json.dumps({"cmps": {"6": {"id": 6, "name": "BannerWare"}}})
        assert load_cmp_list(doc).cmps[6].name == "BannerWare"

    def test_empty_list_every_lookup_unknown(self):
        registry = load_cmp_list(json.dumps({"cmps": []}))
        for cmp_id in (2, 139, 265):
            assert identify_cmp(cmp_id, registry).status is CmpStatus.UNKNOWN

    def test_fixture_range_bounds(self):
        registry = fixture_registry()
        listed = sorted(registry.cmps)
        assert listed[0] == 2 and listed[-1] == 265
        assert identify_cmp(0, registry).status is CmpStatus.INVALID
        assert identify_cmp(1, registry).status is CmpStatus.INVALID
        assert identify_cmp(4095, registry).status is CmpStatus.INVALID

    def test_duplicate_cmp_id(self):
        doc = json.dumps({"cmps": [{"id": 5, "name": "a"}, {"id": 5, "name": "b"}]})
        with pytest.raises(DuplicateId):
            load_cmp_list(doc)


class TestIdentifyCmp:
    def test_known(self):
        identity = identify_cmp(139, fixture_registry())
        assert identity.status is CmpStatus.KNOWN
        assert identity.name == "Telemetry Consent SA"

    def test_invalid_precedence_over_listed(self):
        registry = load_cmp_list(json.dumps({"cmps": [{"id": 1, "name": "bogus"}]}))
        assert identify_cmp(1, registry).status is CmpStatus.INVALID

    def test_unknown(self):
        assert identify_cmp(9999, fixture_registry()).status is CmpStatus.UNKNOWN

    def test_invalid_set_is_configurable(self):
        registry = VendorRegistry(invalid_cmp_ids=frozenset({7}))
        assert identify_cmp(7, registry).status is CmpStatus.INVALID
        assert identify_cmp(4095, registry).status is CmpStatus.UNKNOWN


def consent(purposes, vendors, max_vendor_id=None):
    return ConsentString(
        created=0,
        last_updated=0,
        cmp_id=6,
        vendor_list_version=1,
        allowed_purposes=frozenset(purposes),
        max_vendor_id=max_vendor_id or (max(vendors) if vendors else 0),
        allowed_vendors=frozenset(vendors),
    )


class TestConsentBasedVendor:
    def test_consent_purpose_overlap(self):
        registry = fixture_registry()
        assert has_consent_based_vendor(consent({1}, {8}), registry)

    def test_legitimate_interest_only_vendor(self):
        registry = fixture_registry()
        assert not has_consent_based_vendor(consent({3}, {9}), registry)

    def test_empty_vendor_set_is_never_consent_based(self):
        registry = fixture_registry()
        assert not has_consent_based_vendor(consent({1, 2, 3, 4, 5}, set()), registry)

    def test_unknown_vendor_counts_as_consent_based(self):
        registry = fixture_registry()
        assert has_consent_based_vendor(consent({1}, {9999}, max_vendor_id=9999), registry)

    def test_matches_brute_force_oracle(self):
        rng = random.Random(1234)
        for _ in range(200):
            vendor_count = rng.randint(0, 12)
            vendors = {}
            for vendor_id in rng.sample(range(1, 40), vendor_count):
                vendors[vendor_id] = Vendor(
                    id=vendor_id,
                    name=f"v{vendor_id}",
                    consent_purposes=frozenset(
                        p for p in range(1, 6) if rng.random() < 0.3
                    ),
                    legitimate_interest_purposes=frozenset(
                        p for p in range(1, 6) if rng.random() < 0.3
                    ),
                )
            registry = VendorRegistry(vendors=vendors)
            allowed_vendors = {v for v in range(1, 45) if rng.random() < 0.2}
            allowed_purposes = {p for p in range(1, 6) if rng.random() < 0.4}
            c = consent(allowed_purposes, allowed_vendors, max_vendor_id=50)

            # oracle: explicit double loop over vendors and purposes
            expected = False
            for v in allowed_vendors:
                if v not in vendors:
                    expected = True
                    break
                for p in allowed_purposes:
                    if p in vendors[v].consent_purposes:
                        expected = True
                        break
                if expected:
                    break

            assert has_consent_based_vendor(c, registry) == expected


class TestPurposes:
    def test_default_catalog_has_the_five(self):
        purposes = default_purposes()
        assert sorted(purposes) == [1, 2, 3, 4, 5]
        assert purposes[1].name == "Information storage and access"
        assert purposes[5].name == "Measurement"

    def test_override_file(self):
        doc = json.dumps(
            {"purposes": [{"id": 1, "name": "Storage", "description": "d"}]}
        )
        registry = load_purposes(doc)
        assert registry.purposes[1].name == "Storage"
        assert list(registry.purposes) == [1]

    def test_gvl_snapshot_round(self):
        registry = fixture_registry()
        assert registry.gvl_version == GVL_FIXTURE["vendorListVersion"]
        assert registry.max_vendor_id == 670
