// The three-pane program builder: pick tracks from the library pane or
// the announcements pane, reorder them in the draft, and produce exactly
// the JSON body the server's program endpoint accepts.

import { ProgramBody, TrackInfo } from "./types.js";

export interface ProgramDraft {
  selected: string[]; // ordered track ids
  title: string;
  description: string;
  startIso: string; // ISO-8601 with offset
}

export function emptyDraft(): ProgramDraft {
  return { selected: [], title: "", description: "", startIso: "" };
}

export function addToProgram(draft: ProgramDraft, trackId: string): ProgramDraft {
  return { ...draft, selected: [...draft.selected, trackId] };
}

export function removeAt(draft: ProgramDraft, index: number): ProgramDraft {
  const selected = draft.selected.filter((_, i) => i !== index);
  return { ...draft, selected };
}

/** Swap the item with its neighbor; out-of-range moves are no-ops. */
export function move(draft: ProgramDraft, index: number, delta: -1 | 1): ProgramDraft {
  const target = index + delta;
  if (index < 0 || index >= draft.selected.length) return draft;
  if (target < 0 || target >= draft.selected.length) return draft;
  const selected = [...draft.selected];
  [selected[index], selected[target]] = [selected[target], selected[index]];
  return { ...draft, selected };
}

export function draftProblems(draft: ProgramDraft): string[] {
  const problems: string[] = [];
  if (draft.selected.length === 0) {
    problems.push("the program needs at least one track");
  }
  if (!draft.startIso) {
    problems.push("pick a broadcast date and time");
  } else if (Number.isNaN(Date.parse(draft.startIso))) {
    problems.push("the broadcast time is not a valid timestamp");
  }
  return problems;
}

export function buildProgramBody(draft: ProgramDraft): ProgramBody {
  const problems = draftProblems(draft);
  if (problems.length > 0) {
    throw new Error(problems.join("; "));
  }
  return {
    items: [...draft.selected],
    requested_start: draft.startIso,
    title: draft.title,
    description: draft.description,
    published: true,
  };
}

/** Drafts only live in memory; a refresh before save loses them. */
export function splitPanes(tracks: TrackInfo[]): {
  library: TrackInfo[];
  announcements: TrackInfo[];
} {
  return {
    library: tracks.filter((t) => t.genre !== "announcement"),
    announcements: tracks.filter((t) => t.genre === "announcement"),
  };
}
