/**
 * Content script: bridges the popup to the page's CMP.
 *
 * Read-only by design: the only thing ever sent into the page is the
 * standard getConsentData query. MV3 content scripts load as classic
 * scripts, so this file is self-contained (the module variant of the
 * query protocol lives in messages.ts for the popup and the tests).
 */

declare const chrome: any;

(() => {
  let nextCallId = 0;

  function broadcast(message: unknown): void {
    window.postMessage(message, "*");
    for (let i = 0; i < window.frames.length; i++) {
      try {
        window.frames[i].postMessage(message, "*");
      } catch {
        // cross-origin frame that refuses the message: fine
      }
    }
  }

  function hasCmpLocatorFrame(): boolean {
    try {
      for (let i = 0; i < window.frames.length; i++) {
        try {
          if (window.frames[i].name === "__cmpLocator") return true;
        } catch {
          // inaccessible frame name: skip
        }
      }
    } catch {
      // frames collection unavailable
    }
    return false;
  }

  function queryCmp(timeoutMs: number): Promise<{
    status: string;
    raw: string | null;
    gdprApplies: boolean | null;
  }> {
    const callId = `consent-inspector-${Date.now()}-${nextCallId++}`;
    return new Promise((resolve) => {
      let done = false;
      const finish = (result: {
        status: string;
        raw: string | null;
        gdprApplies: boolean | null;
      }) => {
        if (done) return;
        done = true;
        window.removeEventListener("message", onMessage);
        clearTimeout(timer);
        resolve(result);
      };

      const onMessage = (event: MessageEvent) => {
        let data = event.data;
        if (typeof data === "string") {
          try {
            data = JSON.parse(data);
          } catch {
            return;
          }
        }
        const ret = data?.__cmpReturn;
        if (!ret || ret.callId !== callId) return;
        if (!ret.success || !ret.returnValue || !ret.returnValue.consentData) {
          finish({ status: "no_cmp", raw: null, gdprApplies: null });
          return;
        }
        finish({
          status: "cmp_detected",
          raw: ret.returnValue.consentData,
          gdprApplies: ret.returnValue.gdprApplies ?? null,
        });
      };

      const timer = setTimeout(
        () => finish({ status: "postmessage_unsupported", raw: null, gdprApplies: null }),
        timeoutMs,
      );
      window.addEventListener("message", onMessage);
      broadcast({
        __cmpCall: { command: "getConsentData", parameter: null, callId },
      });
    });
  }

  chrome.runtime.onMessage.addListener(
    (message: any, _sender: any, sendResponse: (response: unknown) => void) => {
      if (message?.type !== "consent-inspector:query") return false;
      queryCmp(message.timeoutMs ?? 2000).then((result) => {
        sendResponse({
          ...result,
          pageUrl: window.location.href,
          locatorFrame: hasCmpLocatorFrame(),
        });
      });
      return true; // answer async
    },
  );
})();
