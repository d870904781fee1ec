"""Consent-string codec tests: golden vector, bit layout, round trips."""

import random
from datetime import datetime, timezone

import pytest

from helpers import FIG3_STRING, random_consent
from tcfaudit.codec import (
    ALPHABET,
    Bitfield,
    ConsentString,
    InvariantViolation,
    MalformedBase64,
    NonCanonicalPadding,
    Range,
    TruncatedPayload,
    UnsupportedVersion,
    decode_consent_string,
    encode_consent_string,
    render_timestamp,
)


def bits_to_text(bits: str) -> str:
    """Independent bit assembler: pack a 0/1 string into base64 chars."""
    padded = bits + "0" * (-len(bits) % 6)
    return "".join(
        ALPHABET[int(padded[i : i + 6], 2)] for i in range(0, len(padded), 6)
    )


def field_bits(value: int, width: int) -> str:
    return format(value, f"0{width}b")


class TestGoldenVector:
    def test_decode_fields(self):
        c = decode_consent_string(FIG3_STRING)
        assert c.version == 1
        assert c.cmp_id == 139
        assert c.allowed_purposes == frozenset({1, 2, 3, 4, 5})
        assert c.max_vendor_id == 556
        assert c.allowed_vendors >= {1, 2, 3, 554, 555, 556}
        assert c.allowed_vendors == frozenset(range(1, 557))
        assert c.consent_language == "EN"
        assert c.vendor_list_version == 122
        assert c.vendor_encoding == Range(default_consent=True, entries=())

    def test_created_renders_as_utc(self):
        c = decode_consent_string(FIG3_STRING)
        assert render_timestamp(c.created) == "2018-11-27 17:24:14"
        # independent check: our decisecond value divides down to the
        # Unix timestamp of that rendering interpreted as UTC
        expected = datetime(2018, 11, 27, 17, 24, 14, tzinfo=timezone.utc)
        assert c.created // 10 == int(expected.timestamp())
        assert c.created == c.last_updated == 15433394542

    def test_reencode_decodes_identically(self):
        c = decode_consent_string(FIG3_STRING)
        assert decode_consent_string(encode_consent_string(c)) == c

    def test_named_zone_rendering(self):
        c = decode_consent_string(FIG3_STRING)
        assert render_timestamp(c.created, "Europe/Paris") == "2018-11-27 18:24:14"


class TestBitLayout:
    def test_hand_assembled_range_string(self):
        # build the wire image bit by bit, independently of the encoder
        bits = (
            field_bits(1, 6)  # version
            + field_bits(15433394542, 36)  # created
            + field_bits(15433394542, 36)  # last updated
            + field_bits(139, 12)  # cmp id
            + field_bits(1, 12)  # cmp version
            + field_bits(2, 6)  # consent screen
            + field_bits(4, 6)  # 'E'
            + field_bits(13, 6)  # 'N'
            + field_bits(122, 12)  # vendor list version
            + "110000000000000000000000"  # purposes {1, 2}
            + field_bits(30, 16)  # max vendor id
            + "1"  # range encoding
            + "1"  # default consent
            + field_bits(1, 12)  # one entry
            + "1"  # it is a range
            + field_bits(10, 16)
            + field_bits(20, 16)
        )
        c = decode_consent_string(bits_to_text(bits))
        assert c.cmp_id == 139 and c.cmp_version == 1 and c.consent_screen == 2
        assert c.allowed_purposes == frozenset({1, 2})
        assert c.max_vendor_id == 30
        assert c.allowed_vendors == frozenset(range(1, 10)) | frozenset(range(21, 31))
        assert c.vendor_encoding == Range(default_consent=True, entries=((10, 20),))

    def test_hand_assembled_bitfield_string(self):
        bits = (
            field_bits(1, 6)
            + field_bits(0, 36) * 2
            + field_bits(6, 12)
            + field_bits(0, 12)
            + field_bits(0, 6)
            + field_bits(4, 6)
            + field_bits(13, 6)
            + field_bits(7, 12)
            + field_bits(0, 24)
            + field_bits(5, 16)
            + "0"  # bitfield
            + "10110"  # vendors 1, 3, 4
        )
        c = decode_consent_string(bits_to_text(bits))
        assert c.vendor_encoding == Bitfield()
        assert c.allowed_vendors == frozenset({1, 3, 4})

    @pytest.mark.parametrize("purpose,expected_index", [(1, 0), (24, 23)])
    def test_purposes_bit_order(self, purpose, expected_index):
        c = ConsentString(
            created=0,
            last_updated=0,
            cmp_id=0,
            vendor_list_version=0,
            allowed_purposes=frozenset({purpose}),
        )
        text = encode_consent_string(c)
        bits = "".join(field_bits(ALPHABET.index(ch), 6) for ch in text)
        # purposes start after version, both timestamps, cmp id/version,
        # screen, language, and vendor list version: 132 bits in
        purposes_field = bits[132 : 132 + 24]
        assert purposes_field.index("1") == expected_index
        assert purposes_field.count("1") == 1

    def test_canonical_prefix(self):
        rng = random.Random(99)
        for _ in range(50):
            assert encode_consent_string(random_consent(rng))[0] == "B"


class TestRoundTrip:
    def test_empty_consent(self):
        empty = ConsentString(
            created=0, last_updated=0, cmp_id=0, vendor_list_version=0
        )
        decoded = decode_consent_string(encode_consent_string(empty))
        assert decoded.allowed_purposes == frozenset()
        assert decoded.allowed_vendors == frozenset()
        assert decoded.max_vendor_id == 0
        assert decoded.without_encoding_choice() == empty.without_encoding_choice()

    def test_seeded_random_strings(self):
        rng = random.Random(20240931)
        for _ in range(300):
            c = random_consent(rng)
            assert decode_consent_string(encode_consent_string(c)) == c

    def test_unspecified_encoding_round_trips_semantically(self):
        rng = random.Random(7)
        for _ in range(100):
            c = random_consent(rng).without_encoding_choice()
            decoded = decode_consent_string(encode_consent_string(c))
            assert decoded.without_encoding_choice() == c

    def test_encoder_picks_shorter_form(self):
        # all vendors allowed: a range with default consent is 14 bits,
        # the bitfield needs 600
        c = ConsentString(
            created=0,
            last_updated=0,
            cmp_id=1,
            vendor_list_version=1,
            max_vendor_id=600,
            allowed_vendors=frozenset(range(1, 601)),
        )
        decoded = decode_consent_string(encode_consent_string(c))
        assert isinstance(decoded.vendor_encoding, Range)

        # a scattered half of all vendors: bitfield wins
        rng = random.Random(3)
        vendors = frozenset(rng.sample(range(1, 601), 300))
        c2 = ConsentString(
            created=0,
            last_updated=0,
            cmp_id=1,
            vendor_list_version=1,
            max_vendor_id=600,
            allowed_vendors=vendors,
        )
        decoded2 = decode_consent_string(encode_consent_string(c2))
        assert decoded2.vendor_encoding == Bitfield()
        assert decoded2.allowed_vendors == vendors

    def test_bitfield_and_range_decode_to_same_vendors(self):
        vendors = frozenset({1, 2, 3, 10, 11, 12, 29})
        base = dict(
            created=5,
            last_updated=5,
            cmp_id=9,
            vendor_list_version=4,
            max_vendor_id=30,
            allowed_vendors=vendors,
        )
        as_bitfield = ConsentString(vendor_encoding=Bitfield(), **base)
        runs = (((1, 3)), ((10, 12)), ((29, 29)))
        as_range = ConsentString(
            vendor_encoding=Range(default_consent=False, entries=runs), **base
        )
        d1 = decode_consent_string(encode_consent_string(as_bitfield))
        d2 = decode_consent_string(encode_consent_string(as_range))
        assert d1.allowed_vendors == d2.allowed_vendors == vendors


class TestErrors:
    def test_malformed_character(self):
        with pytest.raises(MalformedBase64):
            decode_consent_string("BOX5ulu+X5ulu")
        with pytest.raises(MalformedBase64):
            decode_consent_string("")

    def test_truncated_payload(self):
        with pytest.raises(TruncatedPayload):
            decode_consent_string(FIG3_STRING[:10])

    def test_truncated_vendor_section(self):
        # header promises a 556-vendor bitfield, then stops
        bits = (
            field_bits(1, 6)
            + field_bits(0, 36) * 2
            + field_bits(139, 12)
            + field_bits(0, 12)
            + field_bits(0, 6)
            + field_bits(4, 6)
            + field_bits(13, 6)
            + field_bits(1, 12)
            + field_bits(0, 24)
            + field_bits(556, 16)
            + "0"
            + "1" * 20
        )
        with pytest.raises(TruncatedPayload):
            decode_consent_string(bits_to_text(bits))

    def test_unsupported_version(self):
        bits = field_bits(2, 6) + field_bits(0, 36) * 2
        with pytest.raises(UnsupportedVersion):
            decode_consent_string(bits_to_text(bits))

    def test_nonzero_trailing_bits(self):
        tampered = FIG3_STRING[:-1] + "B"
        with pytest.raises(NonCanonicalPadding):
            decode_consent_string(tampered)

    def test_padding_accepted_never_emitted(self):
        empty = ConsentString(created=0, last_updated=0, cmp_id=0, vendor_list_version=0)
        text = encode_consent_string(empty)
        assert "=" not in text
        padded = text + "=" * (-len(text) % 4)
        assert decode_consent_string(padded) == decode_consent_string(text)

    def test_range_entry_beyond_max_vendor(self):
        bits = (
            field_bits(1, 6)
            + field_bits(0, 36) * 2
            + field_bits(1, 12)
            + field_bits(0, 12)
            + field_bits(0, 6)
            + field_bits(0, 6) * 2
            + field_bits(1, 12)
            + field_bits(0, 24)
            + field_bits(10, 16)
            + "1"
            + "0"
            + field_bits(1, 12)
            + "0"
            + field_bits(11, 16)  # single vendor 11 > max 10
        )
        with pytest.raises(InvariantViolation):
            decode_consent_string(bits_to_text(bits))

    @pytest.mark.parametrize(
        "broken",
        [
            dict(cmp_id=4096),
            dict(consent_screen=64),
            dict(max_vendor_id=1 << 16),
            dict(consent_language="e n"),
            dict(consent_language="ENG"),
            dict(allowed_purposes=frozenset({0})),
            dict(allowed_purposes=frozenset({25})),
            dict(version=2),
        ],
    )
    def test_encode_invariant_violations(self, broken):
        base = dict(
            created=0, last_updated=0, cmp_id=1, vendor_list_version=1
        )
        base.update(broken)
        with pytest.raises(InvariantViolation):
            encode_consent_string(ConsentString(**base))

    def test_encode_vendor_outside_max(self):
        c = ConsentString(
            created=0,
            last_updated=0,
            cmp_id=1,
            vendor_list_version=1,
            max_vendor_id=10,
            allowed_vendors=frozenset({11}),
        )
        with pytest.raises(InvariantViolation):
            encode_consent_string(c)

    def test_encode_inconsistent_range_spec(self):
        c = ConsentString(
            created=0,
            last_updated=0,
            cmp_id=1,
            vendor_list_version=1,
            max_vendor_id=10,
            allowed_vendors=frozenset({1, 2}),
            vendor_encoding=Range(default_consent=False, entries=((5, 6),)),
        )
        with pytest.raises(InvariantViolation):
            encode_consent_string(c)
