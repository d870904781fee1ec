/** CMP querying over the fake window, with and without a CMP. */

import { describe, expect, it } from "vitest";

import { captureFromQuery, CaptureSession, decodePasted } from "../src/capture";
import { queryCmp } from "../src/messages";
import { EMPTY_CONSENT, FULL_CONSENT, MockCmp } from "../mock/mock-cmp";
import { FakeWindow } from "./fake-window";

describe("queryCmp", () => {
  it("detects a CMP and returns its stored string", async () => {
    const win = new FakeWindow();
    new MockCmp().install(win);
    const result = await queryCmp(win.transport(), 500);
    expect(result.status).toBe("cmp_detected");
    expect(result.raw).toBe(EMPTY_CONSENT);
    expect(result.gdprApplies).toBe(true);
  });

  it("reports postmessage_unsupported when nothing answers", async () => {
    const win = new FakeWindow();
    const result = await queryCmp(win.transport(), 50);
    expect(result.status).toBe("postmessage_unsupported");
    expect(result.raw).toBeNull();
  });

  it("reports no_cmp when the reply carries no consent data", async () => {
    const win = new FakeWindow();
    win.addEventListener("message", (event) => {
      const call = (event.data as any)?.__cmpCall;
      if (!call) return;
      win.postMessage(
        {
          __cmpReturn: { callId: call.callId, returnValue: null, success: false },
        },
        "*",
      );
    });
    const result = await queryCmp(win.transport(), 500);
    expect(result.status).toBe("no_cmp");
  });

  it("handles JSON-stringified replies", async () => {
    const win = new FakeWindow();
    win.addEventListener("message", (event) => {
      const call = (event.data as any)?.__cmpCall;
      if (!call) return;
      win.postMessage(
        JSON.stringify({
          __cmpReturn: {
            callId: call.callId,
            returnValue: { consentData: FULL_CONSENT, gdprApplies: false },
            success: true,
          },
        }),
        "*",
      );
    });
    const result = await queryCmp(win.transport(), 500);
    expect(result.status).toBe("cmp_detected");
    expect(result.raw).toBe(FULL_CONSENT);
    expect(result.gdprApplies).toBe(false);
  });
});

describe("captures", () => {
  it("decodes a captured string", () => {
    const capture = captureFromQuery(
      "https://www.mock-site.example/page",
      "no_action",
      { status: "cmp_detected", raw: EMPTY_CONSENT, gdprApplies: true },
      1234,
    );
    expect(capture).not.toBeNull();
    expect(capture!.domain).toBe("mock-site.example");
    expect(capture!.decoded?.cmpId).toBe(139);
    expect(capture!.decoded?.allowedPurposeIds).toEqual([]);
    expect(capture!.timestampMs).toBe(1234);
  });

  it("keeps undecodable strings with an error badge", () => {
    const capture = captureFromQuery(
      "https://site.example/",
      "no_action",
      { status: "cmp_detected", raw: "!!!", gdprApplies: null },
    );
    expect(capture!.decoded).toBeNull();
    expect(capture!.decodeError).toContain("malformed_base64");
  });

  it("manual paste decodes or throws", () => {
    expect(decodePasted(` ${FULL_CONSENT} `).allowedPurposeIds).toEqual([1, 2, 3, 4, 5]);
    expect(() => decodePasted("nope!")).toThrow();
  });

  it("session groups captures by domain", () => {
    const session = new CaptureSession();
    session.add(
      captureFromQuery("https://one.example/", "no_action", {
        status: "cmp_detected",
        raw: EMPTY_CONSENT,
        gdprApplies: null,
      }),
    );
    session.add(
      captureFromQuery("https://two.example/", "after_accept", {
        status: "cmp_detected",
        raw: FULL_CONSENT,
        gdprApplies: null,
      }),
    );
    expect(session.domains()).toEqual(["one.example", "two.example"]);
    expect(session.size).toBe(2);
    expect(session.cmpDetected("one.example")).toBe(true);
  });
});
