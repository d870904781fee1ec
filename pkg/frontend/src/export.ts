/**
 * Export a capture session in the auditor's JSON-lines capture schema.
 *
 * Field names here are a wire contract with the CLI's capture loader;
 * an exported file must load there with zero schema errors.
 */

import { CaptureSession, LiveCapture } from "./capture";

interface ObservationWire {
  channel: string;
  raw: string;
  page_url: string;
  request_url: string | null;
  gdpr_applies_param: boolean | null;
  timestamp_ms: number;
}

function observation(capture: LiveCapture): ObservationWire {
  return {
    channel: "cmp_locator_postmessage",
    raw: capture.raw,
    page_url: capture.pageUrl,
    request_url: null,
    gdpr_applies_param: capture.gdprApplies,
    timestamp_ms: capture.timestampMs,
  };
}

export function buildSessionRecord(
  session: CaptureSession,
  domain: string,
  operator = "inspector",
): Record<string, unknown> {
  const captures = session.capturesFor(domain);
  const banner = session.bannerFor(domain);

  const phases: Record<string, { observations: ObservationWire[]; requests: never[] }> = {};
  for (const capture of captures) {
    const key = capture.phase;
    // post-action phases are only exportable with the banner facts that
    // make them meaningful to the auditor
    if (key !== "no_action" && banner === null) continue;
    if (key === "after_refuse" && banner?.optOutPossible !== true) continue;
    if (!phases[key]) phases[key] = { observations: [], requests: [] };
    phases[key].observations.push(observation(capture));
  }
  if (!phases["no_action"]) phases["no_action"] = { observations: [], requests: [] };

  const annotations = banner
    ? [
        {
          banner_state: banner.bannerState,
          opt_out_possible: banner.optOutPossible,
          pre_selected: banner.preSelected,
          operator,
        },
      ]
    : [];

  return {
    domain,
    tld: domain.split(".").pop() ?? "",
    tranco_rank: null,
    tcf_banner_detected: session.cmpDetected(domain),
    phases,
    annotations,
    shared_cookie_probe: null,
  };
}

/** One JSON line per domain seen in the session. */
export function exportJsonLines(session: CaptureSession, operator = "inspector"): string {
  const lines = session
    .domains()
    .map((domain) => JSON.stringify(buildSessionRecord(session, domain, operator)));
  return lines.join("\n") + (lines.length ? "\n" : "");
}
