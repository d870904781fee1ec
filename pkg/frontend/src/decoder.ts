/**
 * TCF v1.1 consent-string decoder.
 *
 * Field-for-field parity with the Python codec in the companion CLI is
 * enforced by the shared vector file (shared/consent_vectors.json);
 * do not change the layout here without regenerating it.
 *
 * Layout: Version(6) Created(36) LastUpdated(36) CmpId(12) CmpVersion(12)
 * ConsentScreen(6) ConsentLanguage(2x6,'A'=0) VendorListVersion(12)
 * PurposesAllowed(24) MaxVendorId(16) EncodingType(1), then either a
 * bitfield of MaxVendorId bits or DefaultConsent(1) + NumEntries(12) +
 * entries of {SingleOrRange(1), Start(16) [, End(16)]}. Timestamps are
 * deciseconds since the Unix epoch.
 */

const ALPHABET =
  "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";

const CHAR_VALUE = new Map([...ALPHABET].map((c, i) => [c, i] as const));

export type DecodeErrorKind =
  | "malformed_base64"
  | "truncated_payload"
  | "unsupported_version"
  | "non_canonical_padding"
  | "invariant_violation";

export class ConsentDecodeError extends Error {
  constructor(
    readonly kind: DecodeErrorKind,
    message: string,
  ) {
    super(message);
    this.name = "ConsentDecodeError";
  }
}

export interface DecodedConsent {
  version: number;
  created: number; // deciseconds since epoch
  lastUpdated: number;
  cmpId: number;
  cmpVersion: number;
  consentScreen: number;
  consentLanguage: string;
  vendorListVersion: number;
  allowedPurposeIds: number[];
  maxVendorId: number;
  allowedVendorIds: number[];
}

class BitReader {
  private pos = 0;

  constructor(private readonly bits: Uint8Array) {}

  get remaining(): number {
    return this.bits.length - this.pos;
  }

  read(width: number): number {
    if (this.pos + width > this.bits.length) {
      throw new ConsentDecodeError(
        "truncated_payload",
        `needed ${width} bits at offset ${this.pos}, only ${this.remaining} left`,
      );
    }
    // plain arithmetic keeps 36-bit fields exact (bitwise ops would
    // truncate to 32 bits)
    let value = 0;
    for (let i = 0; i < width; i++) {
      value = value * 2 + this.bits[this.pos + i];
    }
    this.pos += width;
    return value;
  }

  trailingIsZero(): boolean {
    for (let i = this.pos; i < this.bits.length; i++) {
      if (this.bits[i]) return false;
    }
    return true;
  }
}

function toBits(raw: string): Uint8Array {
  const body = raw.replace(/=+$/, "");
  if (!body) {
    throw new ConsentDecodeError("malformed_base64", "empty consent string");
  }
  const bits = new Uint8Array(body.length * 6);
  for (let i = 0; i < body.length; i++) {
    const value = CHAR_VALUE.get(body[i]);
    if (value === undefined) {
      throw new ConsentDecodeError(
        "malformed_base64",
        `invalid character ${JSON.stringify(body[i])}`,
      );
    }
    for (let b = 0; b < 6; b++) {
      bits[i * 6 + b] = (value >> (5 - b)) & 1;
    }
  }
  return bits;
}

export function decodeConsentString(raw: string): DecodedConsent {
  const reader = new BitReader(toBits(raw.trim()));

  const version = reader.read(6);
  if (version !== 1) {
    throw new ConsentDecodeError(
      "unsupported_version",
      `consent string version ${version}, expected 1`,
    );
  }
  const created = reader.read(36);
  const lastUpdated = reader.read(36);
  const cmpId = reader.read(12);
  const cmpVersion = reader.read(12);
  const consentScreen = reader.read(6);
  const consentLanguage =
    String.fromCharCode(65 + reader.read(6)) +
    String.fromCharCode(65 + reader.read(6));
  const vendorListVersion = reader.read(12);

  const allowedPurposeIds: number[] = [];
  for (let p = 1; p <= 24; p++) {
    if (reader.read(1)) allowedPurposeIds.push(p);
  }

  const maxVendorId = reader.read(16);
  const encodingType = reader.read(1);

  const vendors = new Set<number>();
  if (encodingType === 0) {
    for (let v = 1; v <= maxVendorId; v++) {
      if (reader.read(1)) vendors.add(v);
    }
  } else {
    const defaultConsent = reader.read(1) === 1;
    const numEntries = reader.read(12);
    const excepted = new Set<number>();
    for (let i = 0; i < numEntries; i++) {
      const isRange = reader.read(1) === 1;
      const start = reader.read(16);
      const end = isRange ? reader.read(16) : start;
      if (!(1 <= start && start <= end && end <= maxVendorId)) {
        throw new ConsentDecodeError(
          "invariant_violation",
          `vendor range [${start}, ${end}] outside 1..${maxVendorId}`,
        );
      }
      for (let v = start; v <= end; v++) excepted.add(v);
    }
    if (defaultConsent) {
      for (let v = 1; v <= maxVendorId; v++) {
        if (!excepted.has(v)) vendors.add(v);
      }
    } else {
      for (const v of excepted) vendors.add(v);
    }
  }

  if (!reader.trailingIsZero()) {
    throw new ConsentDecodeError(
      "non_canonical_padding",
      "nonzero bits after the declared payload",
    );
  }

  return {
    version,
    created,
    lastUpdated,
    cmpId,
    cmpVersion,
    consentScreen,
    consentLanguage,
    vendorListVersion,
    allowedPurposeIds,
    maxVendorId,
    allowedVendorIds: [...vendors].sort((a, b) => a - b),
  };
}

/** Render a decisecond timestamp as "YYYY-MM-DD HH:MM:SS" in UTC. */
export function renderTimestamp(deciseconds: number): string {
  const date = new Date(Math.floor(deciseconds / 10) * 1000);
  const pad = (n: number) => String(n).padStart(2, "0");
  return (
    `${date.getUTCFullYear()}-${pad(date.getUTCMonth() + 1)}-` +
    `${pad(date.getUTCDate())} ${pad(date.getUTCHours())}:` +
    `${pad(date.getUTCMinutes())}:${pad(date.getUTCSeconds())}`
  );
}
