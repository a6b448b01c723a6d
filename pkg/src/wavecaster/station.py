"""Wires the catalog, scheduler, stream server and control API together.

The producer thread owns the play state: at each track boundary it asks
the scheduler what comes next, loads that track's frames and paces them
into the broadcast ring. API handlers talk to the running station only
through the small thread-safe methods below.
"""

from __future__ import annotations

import logging
import random
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone

from . import mp3frame, scheduler as sched
from .api import ApiServer, DEFAULT_API_PORT
from .catalog import Catalog, ScheduledProgram
from .streamer import (
    DEFAULT_METAINT,
    DEFAULT_RING_SECONDS,
    DEFAULT_STREAM_PORT,
    BroadcastRing,
    IcyStreamServer,
    PacedPublisher,
)
from .tts import resolve_synthesizer

logger = logging.getLogger(__name__)


@dataclass
class StationConfig:
    station_name: str = "wavecaster"
    station_genre: str = "Various"
    host: str = "0.0.0.0"
    stream_port: int = DEFAULT_STREAM_PORT
    api_port: int = DEFAULT_API_PORT
    metaint: int = DEFAULT_METAINT
    ring_seconds: float = DEFAULT_RING_SECONDS
    max_listeners: int | None = None
    tts_adapter: str = "stub"
    announce_voice: str = ""
    console_dir: str | None = None
    rng_seed: int | None = None


class RadioStation:
    """A running broadcast: producer, stream port and control API."""

    def __init__(self, catalog: Catalog, config: StationConfig | None = None) -> None:
        self.catalog = catalog
        self.config = config or StationConfig()
        self.ring = BroadcastRing(self.config.ring_seconds)
        self.state = sched.PlayState(base_playlist=catalog.playlist())
        for program in catalog.pending_programs():
            self.state.program_queue.append(program)
        self.publisher = PacedPublisher(self.ring)
        self.rng = random.Random(self.config.rng_seed)
        self.synthesizer = resolve_synthesizer(
            self.config.tts_adapter, catalog.root / "announcements"
        )
        self._state_lock = threading.RLock()
        self._stopping = threading.Event()
        self._producer: threading.Thread | None = None
        self._now_playing: dict = {
            "title": "",
            "artist": "",
            "genre": "",
            "started": None,
            "stream_url": "",
        }

        bitrate = 128
        tracks = catalog.tracks()
        if tracks:
            bitrate = tracks[0].bitrate_kbps
        self.stream_server = IcyStreamServer(
            self.ring,
            station_name=self.config.station_name,
            genre=self.config.station_genre,
            bitrate_kbps=bitrate,
            host=self.config.host,
            port=self.config.stream_port,
            metaint=self.config.metaint,
            max_listeners=self.config.max_listeners,
        )
        self.api_server = ApiServer(
            catalog,
            host=self.config.host,
            port=self.config.api_port,
            station=self,
            synthesizer=self.synthesizer,
            announce_voice=self.config.announce_voice,
            console_dir=self.config.console_dir,
        )

    # ------------------------------------------------------------------

    @property
    def station_name(self) -> str:
        return self.config.station_name

    @property
    def stream_url(self) -> str:
        host = self.config.host if self.config.host != "0.0.0.0" else "127.0.0.1"
        return f"http://{host}:{self.stream_server.port}/"

    def start(self) -> None:
        self.stream_server.start()
        self.api_server.stream_url = self.stream_url
        self.api_server.start()
        self._now_playing["stream_url"] = self.stream_url
        self._stopping.clear()
        self._producer = threading.Thread(
            target=self._producer_loop, name="producer", daemon=True
        )
        self._producer.start()

    def stop(self) -> None:
        self._stopping.set()
        if self._producer is not None:
            self._producer.join(timeout=10)
        self.stream_server.stop()
        self.api_server.stop()

    # ------------------------------------------------------------------
    # control-plane hooks (called from API handler threads)

    def refresh_playlist(self) -> None:
        with self._state_lock:
            self.state.base_playlist = self.catalog.playlist()

    def enqueue_program(
        self,
        items,
        requested_start: datetime,
        *,
        title: str = "",
        description: str = "",
        published: bool = True,
    ) -> ScheduledProgram:
        with self._state_lock:
            return sched.enqueue_program(
                self.catalog,
                self.state,
                items,
                requested_start,
                title=title,
                description=description,
                published=published,
            )

    def cancel_program(self, program_id: str) -> None:
        with self._state_lock:
            sched.cancel_program(self.catalog, self.state, program_id)

    def now_playing(self) -> dict:
        with self._state_lock:
            return dict(self._now_playing)

    # ------------------------------------------------------------------

    def _producer_loop(self) -> None:
        while not self._stopping.is_set():
            with self._state_lock:
                if not self.state.base_playlist:
                    self.refresh_playlist()
                if not self.state.base_playlist:
                    should_wait = True
                else:
                    should_wait = False
                    actions = sched.advance(
                        self.state,
                        datetime.now(timezone.utc),
                        like_counts=self.catalog.like_counts(),
                        rng=self.rng,
                    )
            if should_wait:
                time.sleep(0.2)
                continue
            for kind, target in actions:
                if kind == sched.FINISH_PROGRAM:
                    try:
                        self.catalog.mark_program_done(target)
                    except Exception:
                        logger.exception("cannot mark program %s done", target)
                elif kind == sched.START_PROGRAM:
                    try:
                        self.catalog.mark_program_playing(target)
                    except Exception:
                        logger.exception("cannot mark program %s playing", target)
                elif kind == sched.START_TRACK:
                    if not self._play_track(target):
                        time.sleep(0.1)  # broken file: avoid a hot skip loop
            with self._state_lock:
                sched.track_finished(self.state)

    def _play_track(self, track_id: str) -> bool:
        try:
            track = self.catalog.track(track_id)
            frames = [
                (raw, header.duration_s)
                for header, raw in mp3frame.iterate_frames(track.path)
            ]
        except Exception:
            logger.exception("cannot load track %s; skipping", track_id)
            return False
        if not frames:
            logger.warning("track %s has no frames; skipping", track_id)
            return False
        title = track.display_title
        with self._state_lock:
            self._now_playing.update(
                {
                    "title": track.title,
                    "artist": track.artist,
                    "genre": track.genre,
                    "started": datetime.now(timezone.utc).isoformat(),
                    "track_id": track.id,
                    "display_title": title,
                }
            )
        logger.info("now playing: %s", title)
        self.publisher.play(frames, title, should_stop=self._stopping.is_set)
        return True
