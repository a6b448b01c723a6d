"""Ad selection, five-slot rotation and the bundled survey affinity tables.

The selection and rotation rules are deliberate trace-level ports of the
original client behavior, quirks included: the all-ads fallback ignores
the frequency cap, and a slot whose counter resets can end up pinned to
one index. A fair round-robin exists behind a flag for operators who
prefer it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

from .catalog import Ad

IMPRESSION_CAP = 10
SLOT_COUNT = 5
SLOT_STRIDE = 5


def select_ads(ads: Sequence[Ad], liked_genres: Sequence[str]) -> list[Ad]:
    """Pick the ads eligible for a listener with the given liked genres.

    With liked genres: ads targeting any of them and still under the
    impression cap. Without liked genres, or when the targeted result is
    empty, every ad is returned (the fallback ignores the cap).
    """
    liked = list(liked_genres)
    if liked:
        selection = [
            ad
            for ad in ads
            if ad.target_genre in liked and ad.impressions < IMPRESSION_CAP
        ]
    else:
        selection = list(ads)
    if not selection:
        selection = list(ads)
    return selection


@dataclass
class RotationState:
    """Per-listener counters for the five ad slots."""

    counters: list[int] = field(default_factory=lambda: list(range(SLOT_COUNT)))

    def copy(self) -> "RotationState":
        return RotationState(counters=list(self.counters))


def rotation_step(
    state: RotationState, length: int, *, fair: bool = False
) -> tuple[int, ...]:
    """Return the five current slot indices, then advance the counters.

    Each counter advances by the slot stride; a counter that runs past the
    selection wraps back to its slot's base offset (0..4), or to 0 when
    the base itself is out of range, so short selections pin slots rather
    than crash. Indices ≥ length may appear on the first tick for very
    short selections; renderers show a placeholder for those.

    With fair=True all slots instead walk one shared round-robin.
    """
    if length < 1:
        raise ValueError("selection length must be >= 1")
    shown = tuple(state.counters)
    if fair:
        base = state.counters[0]
        state.counters = [(base + SLOT_COUNT + i) % length for i in range(SLOT_COUNT)]
        return shown
    for slot in range(SLOT_COUNT):
        nxt = state.counters[slot] + SLOT_STRIDE
        if nxt >= length:
            nxt = slot if slot < length else 0
        state.counters[slot] = nxt
    return shown


class AffinityTables:
    """The survey cross-tables bundled as package data."""

    def __init__(self, raw: dict):
        self.genres: list[str] = list(raw["genres"])
        self.products: dict[str, list[int]] = {
            name: list(counts) for name, counts in raw["products"].items()
        }
        secondary = raw["secondary_genre"]
        self.secondary_rows: dict[str, list[int]] = {
            name: list(counts) for name, counts in secondary["rows"].items()
        }
        self.secondary_row_sums: dict[str, int] = dict(secondary["row_sums"])
        self.secondary_column_sums: list[int] = list(secondary["column_sums"])
        self.grand_total: int = secondary["grand_total"]

    @classmethod
    def load(cls) -> "AffinityTables":
        text = (
            resources.files("wavecaster")
            .joinpath("data", "affinity_tables.json")
            .read_text(encoding="utf-8")
        )
        return cls(json.loads(text))

    def _genre_column(self, genre: str) -> int:
        try:
            return self.genres.index(genre)
        except ValueError:
            raise KeyError(f"unknown genre {genre!r}") from None

    def rank_products(self, genre: str) -> list[tuple[str, int]]:
        """Product categories for a genre, count descending, ties alphabetical."""
        col = self._genre_column(genre)
        ranked = [(name, counts[col]) for name, counts in self.products.items()]
        return sorted(ranked, key=lambda pair: (-pair[1], pair[0]))

    def top_secondary_genre(self, primary: str) -> tuple[str, int]:
        """Most-chosen secondary genre for listeners of a primary genre."""
        if primary not in self.secondary_rows:
            raise KeyError(f"unknown genre {primary!r}")
        row = self.secondary_rows[primary]
        return min(zip(self.genres, row), key=lambda pair: (-pair[1], pair[0]))


_tables: AffinityTables | None = None


def tables() -> AffinityTables:
    global _tables
    if _tables is None:
        _tables = AffinityTables.load()
    return _tables


def rank_products(genre: str) -> list[tuple[str, int]]:
    return tables().rank_products(genre)


def top_secondary_genre(primary: str) -> tuple[str, int]:
    return tables().top_secondary_genre(primary)
