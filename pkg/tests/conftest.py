from __future__ import annotations

from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from wavecaster import mp3frame
from wavecaster.catalog import Catalog

T0 = datetime(2026, 3, 1, 12, 0, 0, tzinfo=timezone.utc)


class FakeClock:
    """Injectable clock for cooldown/expiry tests."""

    def __init__(self, start: datetime = T0) -> None:
        self.now = start

    def __call__(self) -> datetime:
        return self.now

    def advance(self, **kwargs) -> datetime:
        self.now += timedelta(**kwargs)
        return self.now


@pytest.fixture
def clock() -> FakeClock:
    return FakeClock()


@pytest.fixture
def make_mp3(tmp_path: Path):
    """Factory for CBR fixture files with construction-known truth."""

    counter = {"n": 0}

    def _make(
        bitrate_kbps: int = 128,
        sample_rate_hz: int = 44100,
        frame_count: int = 40,
        *,
        name: str | None = None,
        seed: int | None = None,
    ) -> Path:
        counter["n"] += 1
        data = mp3frame.build_cbr_stream(
            bitrate_kbps,
            sample_rate_hz,
            frame_count,
            seed=seed if seed is not None else counter["n"],
        )
        path = tmp_path / (name or f"fixture_{counter['n']}.mp3")
        path.write_bytes(data)
        return path

    return _make


@pytest.fixture
def library(tmp_path: Path, clock: FakeClock) -> Catalog:
    return Catalog(tmp_path / "library", clock=clock)
