/**
 * The __cmpCall / __cmpReturn postMessage protocol.
 *
 * Direct calls to the page's __cmp() function are off limits for an
 * extension (isolated worlds), so the query goes through the
 * postMessage channel every CMP must answer. The transport is
 * abstracted so the same logic runs against a real window, a frame, or
 * a test double. One query in flight per tab; queries are read-only.
 */

export interface CmpCallMessage {
  __cmpCall: {
    command: "getConsentData";
    parameter: null;
    callId: string;
  };
}

export interface CmpReturnMessage {
  __cmpReturn: {
    callId: string;
    returnValue: { consentData?: string | null; gdprApplies?: boolean } | null;
    success: boolean;
  };
}

export interface MessageTransport {
  /** deliver a message toward the page / CMP frame */
  send(message: unknown): void;
  /** subscribe to messages coming back; returns an unsubscribe hook */
  subscribe(listener: (data: unknown) => void): () => void;
}

export type QueryStatus = "cmp_detected" | "no_cmp" | "postmessage_unsupported";

export interface CmpQueryResult {
  status: QueryStatus;
  raw: string | null;
  gdprApplies: boolean | null;
}

let nextCallId = 0;

export const DEFAULT_REPLY_TIMEOUT_MS = 2000;

function isReturnFor(data: unknown, callId: string): data is CmpReturnMessage {
  return (
    typeof data === "object" &&
    data !== null &&
    "__cmpReturn" in data &&
    (data as CmpReturnMessage).__cmpReturn?.callId === callId
  );
}

/**
 * Ask the CMP for its stored consent data.
 *
 * Resolves with postmessage_unsupported when nothing answers inside the
 * timeout window (the remaining direct-__cmp-only sites); never rejects.
 */
export function queryCmp(
  transport: MessageTransport,
  timeoutMs: number = DEFAULT_REPLY_TIMEOUT_MS,
): Promise<CmpQueryResult> {
  const callId = `consent-inspector-${Date.now()}-${nextCallId++}`;
  const call: CmpCallMessage = {
    __cmpCall: { command: "getConsentData", parameter: null, callId },
  };

  return new Promise((resolve) => {
    let done = false;
    const finish = (result: CmpQueryResult) => {
      if (done) return;
      done = true;
      unsubscribe();
      clearTimeout(timer);
      resolve(result);
    };

    const unsubscribe = transport.subscribe((data) => {
      let parsed = data;
      if (typeof parsed === "string") {
        try {
          parsed = JSON.parse(parsed);
        } catch {
          return; // unrelated string message
        }
      }
      if (!isReturnFor(parsed, callId)) return;
      const ret = (parsed as CmpReturnMessage).__cmpReturn;
      if (!ret.success || !ret.returnValue || !ret.returnValue.consentData) {
        finish({ status: "no_cmp", raw: null, gdprApplies: null });
        return;
      }
      finish({
        status: "cmp_detected",
        raw: ret.returnValue.consentData,
        gdprApplies: ret.returnValue.gdprApplies ?? null,
      });
    });

    const timer = setTimeout(
      () => finish({ status: "postmessage_unsupported", raw: null, gdprApplies: null }),
      timeoutMs,
    );

    transport.send(call);
  });
}
