"""Bit-exact decoder/encoder for TCF v1.1 consent strings.

A consent string is a bit-packed record rendered in web-safe base64
(alphabet ``A-Za-z0-9-_``, padding optional on input, never emitted).
Field order and widths:

    Version(6) Created(36) LastUpdated(36) CmpId(12) CmpVersion(12)
    ConsentScreen(6) ConsentLanguage(2x6, 'A'=0) VendorListVersion(12)
    PurposesAllowed(24) MaxVendorId(16) EncodingType(1)

followed by the vendor section: either a bitfield of MaxVendorId bits
(EncodingType=0), or DefaultConsent(1) + NumEntries(12) + entries of
{SingleOrRange(1), StartVendorId(16) [, EndVendorId(16)]}
(EncodingType=1). Timestamps are deciseconds since the Unix epoch.
Purpose i maps to bit i-1 of the purposes field counted from the most
significant bit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime, timezone
from zoneinfo import ZoneInfo

__all__ = [
    "ConsentError",
    "MalformedBase64",
    "TruncatedPayload",
    "UnsupportedVersion",
    "NonCanonicalPadding",
    "InvariantViolation",
    "Bitfield",
    "Range",
    "ConsentString",
    "decode_consent_string",
    "encode_consent_string",
    "render_timestamp",
]

ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_"
_CHAR_VALUE = {c: i for i, c in enumerate(ALPHABET)}

TCF_PURPOSE_IDS = frozenset(range(1, 6))


class ConsentError(ValueError):
    """Base class for consent-string codec errors."""


class MalformedBase64(ConsentError):
    """Input contains a character outside the web-safe base64 alphabet."""


class TruncatedPayload(ConsentError):
    """Input ends before the declared payload is complete."""


class UnsupportedVersion(ConsentError):
    """Consent string version is not 1."""


class NonCanonicalPadding(ConsentError):
    """Bits after the declared payload are not all zero."""


class InvariantViolation(ConsentError):
    """A field value is outside its declared range."""


@dataclass(frozen=True)
class Bitfield:
    """Marker for the per-vendor bitfield encoding."""


@dataclass(frozen=True)
class Range:
    """Range-based vendor encoding.

    ``entries`` are inclusive (start, end) id intervals that are the
    exceptions to ``default_consent``: excluded ids when the default is
    consent, included ids otherwise.
    """

    default_consent: bool
    entries: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class ConsentString:
    """Decoded TCF v1.1 consent payload.

    ``vendor_encoding`` of ``None`` lets the encoder pick whichever of
    bitfield/range is shorter; decoding always yields a concrete value.
    """

    created: int
    last_updated: int
    cmp_id: int
    cmp_version: int = 0
    consent_screen: int = 0
    consent_language: str = "EN"
    vendor_list_version: int = 1
    allowed_purposes: frozenset[int] = frozenset()
    max_vendor_id: int = 0
    allowed_vendors: frozenset[int] = frozenset()
    vendor_encoding: Bitfield | Range | None = None
    version: int = 1

    def purposes_count(self) -> int:
        """Number of allowed purposes among the five TCF purposes."""
        return len(self.allowed_purposes & TCF_PURPOSE_IDS)

    def extra_purposes(self) -> frozenset[int]:
        """Allowed purpose ids beyond the five defined TCF purposes."""
        return self.allowed_purposes - TCF_PURPOSE_IDS

    def without_encoding_choice(self) -> "ConsentString":
        return replace(self, vendor_encoding=None)


class _BitReader:
    """Sequential reader over the concatenated 6-bit groups of the text."""

    def __init__(self, values: list[int]):
        self._nbits = len(values) * 6
        packed = 0
        for v in values:
            packed = (packed << 6) | v
        self._packed = packed
        self._pos = 0

    @property
    def remaining(self) -> int:
        return self._nbits - self._pos

    def read(self, n: int) -> int:
        if self._pos + n > self._nbits:
            raise TruncatedPayload(
                f"needed {n} bits at offset {self._pos}, only {self.remaining} left"
            )
        shift = self._nbits - self._pos - n
        self._pos += n
        return (self._packed >> shift) & ((1 << n) - 1)

    def trailing_is_zero(self) -> bool:
        rem = self._nbits - self._pos
        return rem == 0 or (self._packed & ((1 << rem) - 1)) == 0


class _BitWriter:
    def __init__(self):
        self._packed = 0
        self._nbits = 0

    def write(self, value: int, n: int) -> None:
        self._packed = (self._packed << n) | (value & ((1 << n) - 1))
        self._nbits += n

    def to_text(self) -> str:
        pad = -self._nbits % 6
        packed = self._packed << pad
        total = self._nbits + pad
        return "".join(
            ALPHABET[(packed >> shift) & 0x3F]
            for shift in range(total - 6, -6, -6)
        )


def _char_values(raw: str) -> list[int]:
    if not raw:
        raise MalformedBase64("empty consent string")
    body = raw.rstrip("=")
    values = []
    for ch in body:
        v = _CHAR_VALUE.get(ch)
        if v is None:
            raise MalformedBase64(f"invalid character {ch!r}")
        values.append(v)
    if not values:
        raise MalformedBase64("consent string is only padding")
    return values


def decode_consent_string(raw: str) -> ConsentString:
    """Decode a web-safe base64 consent string into its fields.

    Raises MalformedBase64, TruncatedPayload, UnsupportedVersion,
    NonCanonicalPadding, or InvariantViolation (out-of-range vendor
    range entry).
    """
    reader = _BitReader(_char_values(raw))
    version = reader.read(6)
    if version != 1:
        raise UnsupportedVersion(f"consent string version {version}, expected 1")
    created = reader.read(36)
    last_updated = reader.read(36)
    cmp_id = reader.read(12)
    cmp_version = reader.read(12)
    consent_screen = reader.read(6)
    lang = chr(ord("A") + reader.read(6)) + chr(ord("A") + reader.read(6))
    vendor_list_version = reader.read(12)
    purposes_field = reader.read(24)
    allowed_purposes = frozenset(
        i + 1 for i in range(24) if (purposes_field >> (23 - i)) & 1
    )
    max_vendor_id = reader.read(16)
    encoding_type = reader.read(1)

    vendors: set[int] = set()
    encoding: Bitfield | Range
    if encoding_type == 0:
        bitfield = reader.read(max_vendor_id) if max_vendor_id else 0
        vendors = {
            i + 1
            for i in range(max_vendor_id)
            if (bitfield >> (max_vendor_id - 1 - i)) & 1
        }
        encoding = Bitfield()
    else:
        default_consent = bool(reader.read(1))
        num_entries = reader.read(12)
        entries: list[tuple[int, int]] = []
        for _ in range(num_entries):
            is_range = reader.read(1)
            start = reader.read(16)
            end = reader.read(16) if is_range else start
            if not (1 <= start <= end <= max_vendor_id):
                raise InvariantViolation(
                    f"vendor range [{start}, {end}] outside 1..{max_vendor_id}"
                )
            entries.append((start, end))
        excepted = set()
        for start, end in entries:
            excepted.update(range(start, end + 1))
        if default_consent:
            vendors = set(range(1, max_vendor_id + 1)) - excepted
        else:
            vendors = excepted
        encoding = Range(default_consent=default_consent, entries=tuple(entries))

    if not reader.trailing_is_zero():
        raise NonCanonicalPadding("nonzero bits after the declared payload")

    return ConsentString(
        version=version,
        created=created,
        last_updated=last_updated,
        cmp_id=cmp_id,
        cmp_version=cmp_version,
        consent_screen=consent_screen,
        consent_language=lang,
        vendor_list_version=vendor_list_version,
        allowed_purposes=allowed_purposes,
        max_vendor_id=max_vendor_id,
        allowed_vendors=frozenset(vendors),
        vendor_encoding=encoding,
    )


def _check_field(name: str, value: int, bits: int) -> None:
    if not (0 <= value < (1 << bits)):
        raise InvariantViolation(f"{name}={value} does not fit in {bits} bits")


def _validate(c: ConsentString) -> None:
    if c.version != 1:
        raise InvariantViolation(f"cannot encode version {c.version}")
    _check_field("created", c.created, 36)
    _check_field("last_updated", c.last_updated, 36)
    _check_field("cmp_id", c.cmp_id, 12)
    _check_field("cmp_version", c.cmp_version, 12)
    _check_field("consent_screen", c.consent_screen, 6)
    _check_field("vendor_list_version", c.vendor_list_version, 12)
    _check_field("max_vendor_id", c.max_vendor_id, 16)
    if len(c.consent_language) != 2 or not all(
        "A" <= ch <= "Z" for ch in c.consent_language
    ):
        raise InvariantViolation(
            f"consent_language {c.consent_language!r} must be two uppercase letters"
        )
    if not all(1 <= p <= 24 for p in c.allowed_purposes):
        raise InvariantViolation("allowed_purposes must be within 1..24")
    if not all(1 <= v <= c.max_vendor_id for v in c.allowed_vendors):
        raise InvariantViolation(
            f"allowed_vendors must be within 1..{c.max_vendor_id}"
        )
    if isinstance(c.vendor_encoding, Range):
        rng = c.vendor_encoding
        for start, end in rng.entries:
            if not (1 <= start <= end <= c.max_vendor_id):
                raise InvariantViolation(
                    f"vendor range [{start}, {end}] outside 1..{c.max_vendor_id}"
                )
        if len(rng.entries) >= (1 << 12):
            raise InvariantViolation("too many range entries for a 12-bit count")
        if _range_vendors(rng, c.max_vendor_id) != set(c.allowed_vendors):
            raise InvariantViolation(
                "range entries do not produce allowed_vendors"
            )


def _range_vendors(rng: Range, max_vendor_id: int) -> set[int]:
    excepted: set[int] = set()
    for start, end in rng.entries:
        excepted.update(range(start, end + 1))
    if rng.default_consent:
        return set(range(1, max_vendor_id + 1)) - excepted
    return excepted


def _runs(ids: set[int]) -> list[tuple[int, int]]:
    runs: list[tuple[int, int]] = []
    for v in sorted(ids):
        if runs and v == runs[-1][1] + 1:
            runs[-1] = (runs[-1][0], v)
        else:
            runs.append((v, v))
    return runs


def _range_bits(entries: list[tuple[int, int]]) -> int:
    return 1 + 12 + sum(17 if start == end else 33 for start, end in entries)


def _shortest_range(vendors: set[int], max_vendor_id: int) -> Range:
    included = _runs(vendors)
    excluded = _runs(set(range(1, max_vendor_id + 1)) - vendors)
    if _range_bits(included) <= _range_bits(excluded):
        return Range(default_consent=False, entries=tuple(included))
    return Range(default_consent=True, entries=tuple(excluded))


def encode_consent_string(c: ConsentString) -> str:
    """Encode a ConsentString to web-safe base64 text without padding.

    When ``vendor_encoding`` is None the shorter of bitfield/range is
    chosen. Raises InvariantViolation on out-of-range fields.
    """
    _validate(c)
    encoding = c.vendor_encoding
    if encoding is None:
        candidate = _shortest_range(set(c.allowed_vendors), c.max_vendor_id)
        if c.max_vendor_id <= _range_bits(list(candidate.entries)):
            encoding = Bitfield()
        else:
            encoding = candidate
    elif not isinstance(encoding, (Bitfield, Range)):
        raise InvariantViolation(f"unknown vendor encoding {encoding!r}")

    w = _BitWriter()
    w.write(c.version, 6)
    w.write(c.created, 36)
    w.write(c.last_updated, 36)
    w.write(c.cmp_id, 12)
    w.write(c.cmp_version, 12)
    w.write(c.consent_screen, 6)
    w.write(ord(c.consent_language[0]) - ord("A"), 6)
    w.write(ord(c.consent_language[1]) - ord("A"), 6)
    w.write(c.vendor_list_version, 12)
    purposes_field = 0
    for p in c.allowed_purposes:
        if p <= 24:
            purposes_field |= 1 << (24 - p)
    w.write(purposes_field, 24)
    w.write(c.max_vendor_id, 16)

    if isinstance(encoding, Bitfield):
        w.write(0, 1)
        bitfield = 0
        for vendor_id in c.allowed_vendors:
            bitfield |= 1 << (c.max_vendor_id - vendor_id)
        if c.max_vendor_id:
            w.write(bitfield, c.max_vendor_id)
    else:
        w.write(1, 1)
        w.write(1 if encoding.default_consent else 0, 1)
        w.write(len(encoding.entries), 12)
        for start, end in encoding.entries:
            if start == end:
                w.write(0, 1)
                w.write(start, 16)
            else:
                w.write(1, 1)
                w.write(start, 16)
                w.write(end, 16)
    return w.to_text()


def render_timestamp(deciseconds: int, zone: str | None = None) -> str:
    """Render a decisecond timestamp as ``YYYY-MM-DD HH:MM:SS``.

    UTC by default; pass an IANA zone name to render in that zone.
    """
    tz = timezone.utc if zone is None else ZoneInfo(zone)
    dt = datetime.fromtimestamp(deciseconds // 10, tz=tz)
    return dt.strftime("%Y-%m-%d %H:%M:%S")
