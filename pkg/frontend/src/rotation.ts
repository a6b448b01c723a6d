// Client-side mirror of the server's five-slot ad rotation. The console
// rotates locally over the selection returned by /api/ads; the sequences
// here must match the server module tick for tick (contract-tested
// against recorded traces).

export const SLOT_COUNT = 5;
export const SLOT_STRIDE = 5;

export interface RotationState {
  counters: number[];
}

export function initialRotationState(): RotationState {
  return { counters: [0, 1, 2, 3, 4] };
}

/**
 * Return the five indices to show now, then advance the counters.
 *
 * Each counter advances by the stride; one that runs past the selection
 * wraps to its slot's base offset, or to 0 when the base itself is out
 * of range. Indices >= length can appear on the first tick for very
 * short selections; callers render a placeholder for those.
 */
export function rotationStep(state: RotationState, length: number): number[] {
  if (length < 1) {
    throw new Error("selection length must be >= 1");
  }
  const shown = [...state.counters];
  for (let slot = 0; slot < SLOT_COUNT; slot++) {
    let next = state.counters[slot] + SLOT_STRIDE;
    if (next >= length) {
      next = slot < length ? slot : 0;
    }
    state.counters[slot] = next;
  }
  return shown;
}
