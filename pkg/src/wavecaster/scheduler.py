"""What plays next: weighted shuffle, queued programs and announcements.

The decision core is pure: `scheduler_step` looks at the play state and
the clock and names exactly one action, which `apply_action` then applies.
Programs start only at track boundaries, play their items contiguously,
and hand control back to shuffle when done.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from datetime import datetime

from .catalog import Catalog, ScheduledProgram, Track
from .tts import SynthesisError

logger = logging.getLogger(__name__)

# Action kinds returned by scheduler_step.
START_TRACK = "start_track"
START_PROGRAM = "start_program"
FINISH_PROGRAM = "finish_program"
IDLE = "idle"

Action = tuple[str, str | None]


class SchedulerError(Exception):
    pass


class EmptyLibraryError(SchedulerError):
    pass


@dataclass
class PlayState:
    mode: str = "shuffle"  # "shuffle" | "program"
    current_track: str | None = None
    current_started: datetime | None = None
    program_queue: list[ScheduledProgram] = field(default_factory=list)
    base_playlist: list[str] = field(default_factory=list)
    base_index: int = 0
    active_program: ScheduledProgram | None = None
    program_cursor: int = 0
    last_track: str | None = None


def next_item(
    state: PlayState,
    like_counts: dict[str, int],
    rng: random.Random,
) -> str:
    """Sample a track with probability proportional to 1 + live likes.

    The immediately preceding track is excluded whenever the library holds
    at least two tracks, so tiny libraries never loop one song.
    """
    pool = state.base_playlist
    if not pool:
        raise EmptyLibraryError("cannot shuffle an empty library")
    candidates = pool
    if len(pool) >= 2 and state.last_track in pool:
        candidates = [t for t in pool if t != state.last_track]
    weights = [1 + like_counts.get(t, 0) for t in candidates]
    return rng.choices(candidates, weights=weights, k=1)[0]


def scheduler_step(
    state: PlayState,
    now: datetime,
    *,
    like_counts: dict[str, int] | None = None,
    rng: random.Random | None = None,
) -> Action:
    """Decide the single next action; mutates nothing.

    Mid-track: idle. At a boundary: continue the playing program, finish
    it when its items ran out, start the first due pending program, or
    fall back to weighted shuffle. A program that came due mid-track is
    thereby deferred to the boundary.
    """
    if state.current_track is not None:
        return (IDLE, None)
    if state.mode == "program" and state.active_program is not None:
        program = state.active_program
        if state.program_cursor < len(program.items):
            return (START_TRACK, program.items[state.program_cursor])
        return (FINISH_PROGRAM, program.id)
    due = next(
        (p for p in state.program_queue if p.requested_start <= now), None
    )
    if due is not None:
        return (START_PROGRAM, due.id)
    track = next_item(state, like_counts or {}, rng or random.Random())
    return (START_TRACK, track)


def apply_action(state: PlayState, action: Action, now: datetime) -> None:
    """Advance the play state by one decided action."""
    kind, target = action
    if kind == IDLE:
        return
    if kind == START_TRACK:
        state.current_track = target
        state.current_started = now
        state.last_track = target
        if state.mode == "program":
            state.program_cursor += 1
        elif state.base_playlist:
            state.base_index = (state.base_index + 1) % len(state.base_playlist)
        return
    if kind == START_PROGRAM:
        program = next(p for p in state.program_queue if p.id == target)
        state.program_queue.remove(program)
        state.active_program = program
        state.program_cursor = 0
        state.mode = "program"
        return
    if kind == FINISH_PROGRAM:
        state.active_program = None
        state.program_cursor = 0
        state.mode = "shuffle"
        return
    raise SchedulerError(f"unknown action {kind!r}")


def advance(
    state: PlayState,
    now: datetime,
    *,
    like_counts: dict[str, int] | None = None,
    rng: random.Random | None = None,
) -> list[Action]:
    """Run decide/apply until a track starts (or nothing can happen).

    At a boundary this yields e.g. [finish_program, start_program,
    start_track]; exactly one start_track is produced whenever the
    library is non-empty.
    """
    actions: list[Action] = []
    for _ in range(4):  # finish + start_program + start_track is the longest chain
        action = scheduler_step(state, now, like_counts=like_counts, rng=rng)
        actions.append(action)
        apply_action(state, action, now)
        if action[0] in (START_TRACK, IDLE):
            break
    return actions


def track_finished(state: PlayState) -> None:
    """Mark the track boundary; the next step call makes a fresh decision."""
    state.current_track = None
    state.current_started = None


def enqueue_program(
    catalog: Catalog,
    state: PlayState,
    items: list[str],
    requested_start: datetime,
    *,
    title: str = "",
    description: str = "",
    published: bool = True,
    now: datetime | None = None,
) -> ScheduledProgram:
    """Persist a program and queue it, ordered by start time, FIFO on ties."""
    program = catalog.add_program(
        items,
        requested_start,
        title=title,
        description=description,
        published=published,
        now=now,
    )
    state.program_queue.append(program)
    state.program_queue.sort(key=lambda p: p.requested_start)  # stable: FIFO ties
    return program


def cancel_program(catalog: Catalog, state: PlayState, program_id: str) -> None:
    """Cancel a pending program; playing/finished ones cannot be cancelled."""
    catalog.cancel_program(program_id)
    state.program_queue = [p for p in state.program_queue if p.id != program_id]


def make_announcement(
    text: str,
    voice: str,
    synthesizer,
    catalog: Catalog,
    *,
    language: str = "",
) -> Track:
    """Synthesize text and ingest the result as a schedulable library track.

    Two-phase under the hood: `synthesizer.synthesize` produces a file the
    caller could preview; `commit_announcement` ingests it. Adapter
    failures and non-MP3 output both leave the library unchanged.
    """
    path = synthesize_announcement(text, voice, synthesizer)
    return commit_announcement(catalog, path, text, voice, language=language)


def synthesize_announcement(text: str, voice: str, synthesizer):
    """Phase one: produce the MP3 for preview; raises SynthesisError."""
    if not text or not text.strip():
        raise SynthesisError("text must be non-empty")
    return synthesizer.synthesize(text, voice)


def commit_announcement(
    catalog: Catalog, path, text: str, voice: str, *, language: str = ""
) -> Track:
    """Phase two: ingest a previewed announcement into the library."""
    title = text if len(text) <= 60 else text[:57] + "..."
    return catalog.add_track(
        title=title,
        artist="synthesizer",
        album="announcements",
        genre="announcement",
        language=language or voice,
        file=path,
    )
