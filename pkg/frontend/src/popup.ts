/**
 * Popup panel: query the active tab's CMP, show what it stores, collect
 * banner facts from the human, export the session for the CLI auditor.
 */

import { CaptureSession, CapturePhase, captureFromQuery, decodePasted } from "./capture";
import { DecodedConsent } from "./decoder";
import { renderTimestamp } from "./decoder";
import { exportJsonLines } from "./export";
import { cmpLabel, purposeLabel } from "./snapshots";

declare const chrome: any;

const session = new CaptureSession();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function describe(decoded: DecodedConsent): string {
  const purposes = decoded.allowedPurposeIds.length
    ? decoded.allowedPurposeIds.map((p) => `  - ${purposeLabel(p)}`).join("\n")
    : "  (none)";
  return [
    `CMP: ${cmpLabel(decoded.cmpId)} (id ${decoded.cmpId}, version ${decoded.cmpVersion})`,
    `stored: ${renderTimestamp(decoded.created)} UTC`,
    `updated: ${renderTimestamp(decoded.lastUpdated)} UTC`,
    `vendor list v${decoded.vendorListVersion}, language ${decoded.consentLanguage}`,
    `${decoded.allowedPurposeIds.length} purposes allowed:`,
    purposes,
    `${decoded.allowedVendorIds.length} vendors allowed (max id ${decoded.maxVendorId})`,
  ].join("\n");
}

function show(text: string, isError = false): void {
  const out = el<HTMLPreElement>("output");
  out.textContent = text;
  out.classList.toggle("error", isError);
}

function currentPhase(): CapturePhase {
  return (el<HTMLSelectElement>("phase").value as CapturePhase) ?? "no_action";
}

async function captureActiveTab(): Promise<void> {
  const [tab] = await chrome.tabs.query({ active: true, currentWindow: true });
  if (!tab?.id) {
    show("no active tab", true);
    return;
  }
  const reply = await chrome.tabs.sendMessage(tab.id, {
    type: "consent-inspector:query",
    timeoutMs: Number(el<HTMLInputElement>("timeout").value) || undefined,
  });
  if (!reply) {
    show("content script unreachable on this page", true);
    return;
  }
  if (reply.status === "postmessage_unsupported") {
    session.markCmpPresence(new URL(reply.pageUrl).hostname, reply.locatorFrame);
    show(
      "no postMessage reply from a CMP.\n" +
        "If the site only exposes a direct __cmp() function, run\n" +
        "  __cmp('getConsentData', null, r => console.log(r.consentData))\n" +
        "in the devtools console and paste the string below.",
      true,
    );
    return;
  }
  if (reply.status === "no_cmp" || !reply.raw) {
    show("CMP answered without consent data (no choice registered yet?)");
    return;
  }
  const capture = captureFromQuery(reply.pageUrl, currentPhase(), reply);
  session.add(capture);
  if (capture?.decoded) {
    show(describe(capture.decoded));
  } else if (capture) {
    show(`undecodable consent string:\n${capture.raw}\n${capture.decodeError}`, true);
  }
  el<HTMLSpanElement>("count").textContent = String(session.size);
}

function pasteDecode(): void {
  const raw = el<HTMLTextAreaElement>("pasted").value;
  try {
    show(describe(decodePasted(raw)));
  } catch (error) {
    show(String(error), true);
  }
}

async function exportSession(): Promise<void> {
  const [tab] = await chrome.tabs.query({ active: true, currentWindow: true });
  if (tab?.url) {
    const domain = new URL(tab.url).hostname.replace(/^www\./, "");
    session.setBannerFacts(domain, {
      bannerState: el<HTMLSelectElement>("banner-state").value as any,
      optOutPossible: el<HTMLInputElement>("opt-out").checked,
      preSelected: el<HTMLInputElement>("pre-selected").checked,
    });
  }
  const body = exportJsonLines(session);
  const url = URL.createObjectURL(new Blob([body], { type: "application/jsonl" }));
  await chrome.downloads.download({ url, filename: "consent-captures.jsonl" });
}

el<HTMLButtonElement>("capture").addEventListener("click", captureActiveTab);
el<HTMLButtonElement>("decode-pasted").addEventListener("click", pasteDecode);
el<HTMLButtonElement>("export").addEventListener("click", exportSession);
el<HTMLButtonElement>("clear").addEventListener("click", () => {
  session.clear();
  el<HTMLSpanElement>("count").textContent = "0";
  show("session cleared");
});
