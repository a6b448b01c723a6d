"""Spin up a full in-process station against synthesized fixture audio."""

from __future__ import annotations

import contextlib
import threading
from pathlib import Path

from wavecaster import mp3frame
from wavecaster.catalog import Catalog
from wavecaster.station import RadioStation, StationConfig


class RingRecorder:
    """Drains a ring subscription into a list; the producer-side truth."""

    def __init__(self, ring) -> None:
        self.packets = []
        burst, self._sub = ring.attach()
        self.packets.extend(burst)
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._drain, daemon=True)
        self._thread.start()

    def _drain(self) -> None:
        while not self._stop.is_set():
            packet = self._sub.get(timeout=0.1)
            if packet is not None:
                self.packets.append(packet)

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=2)

    def audio_bytes(self) -> bytes:
        return b"".join(p.data for p in self.packets)


def build_library(
    root: Path,
    *,
    track_count: int = 3,
    frame_count: int = 40,
    bitrate: int = 128,
    sample_rate: int = 44100,
    genres: tuple[str, ...] = ("Rock", "POP", "Jazz"),
) -> Catalog:
    catalog = Catalog(root)
    for i in range(track_count):
        path = root / f"track_{i}.mp3"
        path.write_bytes(
            mp3frame.build_cbr_stream(bitrate, sample_rate, frame_count, seed=100 + i)
        )
        catalog.add_track(
            title=f"Track {i}",
            artist=f"Artist {i}",
            album="Fixtures",
            genre=genres[i % len(genres)],
            language="polish",
            file=path,
        )
    return catalog


@contextlib.contextmanager
def running_station(
    tmp_path: Path,
    *,
    track_count: int = 3,
    frame_count: int = 40,
    bitrate: int = 128,
    ring_seconds: float = 2.0,
    metaint: int = 4096,
    record: bool = False,
    **config_kwargs,
):
    catalog = build_library(
        tmp_path / "library",
        track_count=track_count,
        frame_count=frame_count,
        bitrate=bitrate,
    )
    config = StationConfig(
        station_name="TestFM",
        station_genre="Rock",
        host="127.0.0.1",
        stream_port=0,
        api_port=0,
        metaint=metaint,
        ring_seconds=ring_seconds,
        rng_seed=1234,
        **config_kwargs,
    )
    station = RadioStation(catalog, config)
    recorder = None
    try:
        if record:
            recorder = RingRecorder(station.ring)
        station.start()
        yield station, recorder
    finally:
        if recorder is not None:
            recorder.stop()
        station.stop()
