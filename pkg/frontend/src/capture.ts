/**
 * Live capture session state: what the inspector saw on which tab, in
 * which phase of the user's banner interaction.
 */

import { ConsentDecodeError, DecodedConsent, decodeConsentString } from "./decoder";
import { CmpQueryResult } from "./messages";

export type CapturePhase = "no_action" | "after_refuse" | "after_accept";

export interface LiveCapture {
  domain: string;
  pageUrl: string;
  phase: CapturePhase;
  raw: string;
  timestampMs: number;
  gdprApplies: boolean | null;
  decoded: DecodedConsent | null;
  decodeError: string | null;
}

export interface BannerFacts {
  bannerState: "present" | "absent" | "broken";
  optOutPossible: boolean | null;
  preSelected: boolean | null;
}

export function domainOf(pageUrl: string): string {
  try {
    const host = new URL(pageUrl).hostname.toLowerCase();
    return host.startsWith("www.") ? host.slice(4) : host;
  } catch {
    return pageUrl;
  }
}

export function captureFromQuery(
  pageUrl: string,
  phase: CapturePhase,
  result: CmpQueryResult,
  now: number = Date.now(),
): LiveCapture | null {
  if (result.status !== "cmp_detected" || !result.raw) return null;
  let decoded: DecodedConsent | null = null;
  let decodeError: string | null = null;
  try {
    decoded = decodeConsentString(result.raw);
  } catch (error) {
    decodeError =
      error instanceof ConsentDecodeError
        ? `${error.kind}: ${error.message}`
        : String(error);
  }
  return {
    domain: domainOf(pageUrl),
    pageUrl,
    phase,
    raw: result.raw,
    timestampMs: now,
    gdprApplies: result.gdprApplies,
    decoded,
    decodeError,
  };
}

/** Decode a string the user pasted manually (the direct-__cmp-only
 * workaround); throws ConsentDecodeError on bad input. */
export function decodePasted(raw: string): DecodedConsent {
  return decodeConsentString(raw.trim());
}

export class CaptureSession {
  private captures: LiveCapture[] = [];
  private banner: Map<string, BannerFacts> = new Map();
  private cmpSeen: Map<string, boolean> = new Map();

  add(capture: LiveCapture | null): void {
    if (capture) {
      this.captures.push(capture);
      this.cmpSeen.set(capture.domain, true);
    }
  }

  markCmpPresence(domain: string, present: boolean): void {
    if (!this.cmpSeen.get(domain)) this.cmpSeen.set(domain, present);
  }

  setBannerFacts(domain: string, facts: BannerFacts): void {
    this.banner.set(domain, facts);
  }

  domains(): string[] {
    const all = new Set<string>([
      ...this.captures.map((c) => c.domain),
      ...this.banner.keys(),
    ]);
    return [...all].sort();
  }

  capturesFor(domain: string): LiveCapture[] {
    return this.captures.filter((c) => c.domain === domain);
  }

  bannerFor(domain: string): BannerFacts | null {
    return this.banner.get(domain) ?? null;
  }

  cmpDetected(domain: string): boolean {
    return this.cmpSeen.get(domain) ?? this.capturesFor(domain).length > 0;
  }

  get size(): number {
    return this.captures.length;
  }

  clear(): void {
    this.captures = [];
    this.banner.clear();
    this.cmpSeen.clear();
  }
}
