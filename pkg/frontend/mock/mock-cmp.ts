/**
 * A self-contained fake CMP for exercising the inspector end to end
 * without touching any real website.
 *
 * It answers the standard getConsentData postMessage query and keeps a
 * stored consent string that banner clicks update. With
 * violateOnRefuse=true it misbehaves exactly like the sites the auditor
 * flags: refusing consent still stores a full positive string.
 *
 * The canned strings were produced by the companion CLI encoder
 * (cmp id 139, vendor list v168; vendors 8/12/25/100 for the full one).
 */

export const EMPTY_CONSENT = "BOnyv0AOnyv0ACLACBENCoAAAAAp6AA";
export const FULL_CONSENT = "BOnyv0AOnyv0ACLACBENCo-AAAAp6AEAAQAAwADIAZA";

export interface WindowLike {
  postMessage(data: unknown, targetOrigin?: string): void;
  addEventListener(type: "message", handler: (event: { data: unknown }) => void): void;
}

type CmpCallback = (result: { consentData: string; gdprApplies: boolean }, success: boolean) => void;

export interface MockCmpOptions {
  violateOnRefuse?: boolean;
  replyDelayMs?: number;
}

export class MockCmp {
  stored: string = EMPTY_CONSENT;
  choiceMade = false;
  private readonly violateOnRefuse: boolean;
  private readonly replyDelayMs: number;

  constructor(options: MockCmpOptions = {}) {
    this.violateOnRefuse = options.violateOnRefuse ?? false;
    this.replyDelayMs = options.replyDelayMs ?? 0;
  }

  install(win: WindowLike & { __cmp?: unknown }): void {
    win.__cmp = (command: string, _parameter: unknown, callback: CmpCallback) => {
      if (command === "getConsentData") {
        callback({ consentData: this.stored, gdprApplies: true }, true);
      }
    };
    win.addEventListener("message", (event) => this.onMessage(win, event.data));
  }

  refuse(): void {
    this.choiceMade = true;
    this.stored = this.violateOnRefuse ? FULL_CONSENT : EMPTY_CONSENT;
  }

  accept(): void {
    this.choiceMade = true;
    this.stored = FULL_CONSENT;
  }

  private onMessage(win: WindowLike, data: unknown): void {
    let parsed = data;
    if (typeof parsed === "string") {
      try {
        parsed = JSON.parse(parsed);
      } catch {
        return;
      }
    }
    const call = (parsed as { __cmpCall?: { command: string; callId: string } })?.__cmpCall;
    if (!call || call.command !== "getConsentData") return;
    const reply = {
      __cmpReturn: {
        callId: call.callId,
        returnValue: { consentData: this.stored, gdprApplies: true },
        success: true,
      },
    };
    if (this.replyDelayMs > 0) {
      setTimeout(() => win.postMessage(reply, "*"), this.replyDelayMs);
    } else {
      win.postMessage(reply, "*");
    }
  }
}
