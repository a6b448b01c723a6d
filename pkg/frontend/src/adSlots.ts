// View model for the five rotating ad slots: which creative each slot
// shows, and which impressions to report after a tick.

import { AdInfo } from "./types.js";
import { RotationState, rotationStep, SLOT_COUNT } from "./rotation.js";

export interface SlotRender {
  slot: number;
  ad: AdInfo | null; // null renders the placeholder
}

export function renderSlots(selection: AdInfo[], shown: number[]): SlotRender[] {
  return shown.map((index, slot) => ({
    slot,
    ad: index >= 0 && index < selection.length ? selection[index] : null,
  }));
}

export function tickSlots(
  selection: AdInfo[],
  state: RotationState,
): SlotRender[] {
  if (selection.length === 0) {
    // impossible per the server's non-starvation rule, but render
    // placeholders rather than crash if it ever happens
    return Array.from({ length: SLOT_COUNT }, (_, slot) => ({ slot, ad: null }));
  }
  return renderSlots(selection, rotationStep(state, selection.length));
}

/** Ad ids newly on screen this tick; each one costs one impression report. */
export function newImpressions(
  previous: (string | null)[],
  current: (string | null)[],
): string[] {
  const fresh: string[] = [];
  for (let slot = 0; slot < current.length; slot++) {
    const id = current[slot];
    if (id !== null && id !== previous[slot]) {
      fresh.push(id);
    }
  }
  return fresh;
}

export function slotIds(slots: SlotRender[]): (string | null)[] {
  return slots.map((s) => (s.ad ? s.ad.id : null));
}
