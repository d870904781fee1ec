/**
 * Bundled snapshots: the five purposes and a CMP-list extract.
 *
 * The inspector must work offline on any page, so names are compiled
 * in. Swap CMP_NAMES for a fuller snapshot as needed; unknown ids
 * render as "CMP #<id>".
 */

export const PURPOSE_NAMES: Record<number, string> = {
  1: "Information storage and access",
  2: "Personalisation",
  3: "Ad selection, delivery, reporting",
  4: "Content selection, delivery, reporting",
  5: "Measurement",
};

export const INVALID_CMP_IDS = new Set([0, 1, 4095]);

export const CMP_NAMES: Record<number, string> = {
  2: "First Consent Co",
  6: "BannerWare",
  10: "ConsentHub",
  45: "ChoiceLayer",
  139: "Telemetry Consent SA",
  200: "OptBox",
  265: "LastListed CMP",
};

export function cmpLabel(cmpId: number): string {
  if (INVALID_CMP_IDS.has(cmpId)) return `invalid CMP id ${cmpId}`;
  return CMP_NAMES[cmpId] ?? `CMP #${cmpId}`;
}

export function purposeLabel(purposeId: number): string {
  return PURPOSE_NAMES[purposeId] ?? `purpose ${purposeId} (outside the TCF five)`;
}
