/** Decode parity against the shared vector file generated by the CLI
 * codec: every field must match on every vector. */

import { readFileSync } from "node:fs";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import {
  ConsentDecodeError,
  decodeConsentString,
  renderTimestamp,
} from "../src/decoder";

const here = dirname(fileURLToPath(import.meta.url));
const vectors = JSON.parse(
  readFileSync(join(here, "..", "..", "shared", "consent_vectors.json"), "utf-8"),
) as Array<{ raw: string; decoded: Record<string, unknown> }>;

describe("shared-vector parity", () => {
  it("has enough vectors including the golden one", () => {
    expect(vectors.length).toBeGreaterThanOrEqual(50);
    expect(vectors[0].raw).toBe("BOX5uluOX5uluCLAAAENB6-AAAAizAAA");
  });

  it.each(vectors.map((v, i) => [i, v] as const))(
    "vector %i decodes field-for-field",
    (_i, vector) => {
      const decoded = decodeConsentString(vector.raw);
      const expected = vector.decoded;
      expect(decoded.version).toBe(expected.version);
      expect(decoded.created).toBe(expected.created);
      expect(decoded.lastUpdated).toBe(expected.lastUpdated);
      expect(decoded.cmpId).toBe(expected.cmpId);
      expect(decoded.cmpVersion).toBe(expected.cmpVersion);
      expect(decoded.consentScreen).toBe(expected.consentScreen);
      expect(decoded.consentLanguage).toBe(expected.consentLanguage);
      expect(decoded.vendorListVersion).toBe(expected.vendorListVersion);
      expect(decoded.allowedPurposeIds).toEqual(expected.allowedPurposeIds);
      expect(decoded.maxVendorId).toBe(expected.maxVendorId);
      expect(decoded.allowedVendorIds).toEqual(expected.allowedVendorIds);
      expect(renderTimestamp(decoded.created)).toBe(expected.createdText);
    },
  );
});

describe("golden string", () => {
  it("matches the reference decode", () => {
    const decoded = decodeConsentString("BOX5uluOX5uluCLAAAENB6-AAAAizAAA");
    expect(decoded.cmpId).toBe(139);
    expect(decoded.allowedPurposeIds).toEqual([1, 2, 3, 4, 5]);
    expect(decoded.maxVendorId).toBe(556);
    expect(decoded.allowedVendorIds).toHaveLength(556);
    expect(renderTimestamp(decoded.created)).toBe("2018-11-27 17:24:14");
  });
});

describe("errors", () => {
  const kindOf = (raw: string) => {
    try {
      decodeConsentString(raw);
      return null;
    } catch (error) {
      return (error as ConsentDecodeError).kind;
    }
  };

  it("rejects foreign characters", () => {
    expect(kindOf("BO$$$")).toBe("malformed_base64");
    expect(kindOf("")).toBe("malformed_base64");
  });

  it("rejects truncated payloads", () => {
    expect(kindOf("BOX5ulu")).toBe("truncated_payload");
  });

  it("rejects other versions", () => {
    expect(kindOf("COX5uluOX5uluCLAAAENB6-AAAAizAAA")).toBe("unsupported_version");
  });

  it("rejects nonzero trailing bits", () => {
    expect(kindOf("BOX5uluOX5uluCLAAAENB6-AAAAizAAB")).toBe("non_canonical_padding");
  });

  it("accepts padding characters", () => {
    const padded = "BOX5uluOX5uluCLAAAENB6-AAAAizAAA" + "=";
    expect(decodeConsentString(padded).cmpId).toBe(139);
  });
});
