// Poll-state machine for the now-playing panel: keeps the last good
// snapshot with a stale flag and exponential backoff while the API is
// unreachable, and signals a login redirect on 401.

import { NowPlaying } from "./types.js";

export interface PollState {
  snapshot: NowPlaying | null;
  stale: boolean;
  failures: number;
  nextDelayMs: number;
}

export type PollEffect = "none" | "redirect-login";

export function initialPollState(baseDelayMs: number): PollState {
  return { snapshot: null, stale: false, failures: 0, nextDelayMs: baseDelayMs };
}

export function applyPollSuccess(
  state: PollState,
  body: NowPlaying,
  baseDelayMs: number,
): PollState {
  return { snapshot: body, stale: false, failures: 0, nextDelayMs: baseDelayMs };
}

export function applyPollFailure(
  state: PollState,
  status: number | null,
  baseDelayMs: number,
  maxDelayMs = 60_000,
): { state: PollState; effect: PollEffect } {
  if (status === 401) {
    return { state, effect: "redirect-login" };
  }
  const failures = state.failures + 1;
  return {
    state: {
      snapshot: state.snapshot, // last title stays up, marked stale
      stale: true,
      failures,
      nextDelayMs: Math.min(baseDelayMs * 2 ** failures, maxDelayMs),
    },
    effect: "none",
  };
}

export function displayTitle(state: PollState): string {
  if (!state.snapshot || !state.snapshot.title) {
    return "—";
  }
  const { artist, title } = state.snapshot;
  return artist ? `${artist} - ${title}` : title;
}
