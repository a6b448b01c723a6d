"""Persistent store for tracks, ads, users, likes and scheduled programs.

The store lives in a library directory as five human-readable JSON
documents (songs, playlist, user_likes, ads, programs). All mutations are
serialized through one lock and written through atomically, so a failed
operation never leaves a half-written store behind.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import secrets
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import mp3frame

logger = logging.getLogger(__name__)

LIKE_LIFETIME = timedelta(days=30)
LIKE_COOLDOWN = timedelta(hours=24)
SESSION_IDLE_LIMIT = timedelta(hours=24)
PBKDF2_ITERATIONS = 50_000

PROGRAM_STATES = ("pending", "playing", "done", "cancelled")
# pending -> playing -> done, or pending -> cancelled; nothing else.
_PROGRAM_TRANSITIONS = {
    ("pending", "playing"),
    ("playing", "done"),
    ("pending", "cancelled"),
}


class CatalogError(Exception):
    """Base error for store operations."""


class UnknownEntityError(CatalogError, KeyError):
    """A referenced user/track/ad/program id does not exist."""


class DuplicateLoginError(CatalogError):
    pass


class AuthenticationError(CatalogError):
    pass


class InvalidTrackFileError(CatalogError):
    """The file is unreadable or contains no valid MP3 frame."""


class ProgramStateError(CatalogError):
    """An illegal program lifecycle transition was requested."""


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def _iso(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat()


def _from_iso(text: str) -> datetime:
    return datetime.fromisoformat(text)


@dataclass(frozen=True)
class Track:
    id: str
    title: str
    artist: str
    album: str
    genre: str
    language: str
    path: str
    added: datetime
    duration_s: float
    bitrate_kbps: int

    @property
    def display_title(self) -> str:
        return f"{self.artist} - {self.title}" if self.artist else self.title


@dataclass(frozen=True)
class Ad:
    id: str
    creative_path: str
    target_genre: str
    click_url: str
    impressions: int = 0


@dataclass(frozen=True)
class UserAccount:
    id: str
    login: str
    credential: str  # "pbkdf2$<iterations>$<salt-hex>$<digest-hex>"
    registered: datetime
    last_seen: datetime


@dataclass(frozen=True)
class Like:
    user_id: str
    track_id: str
    genre: str
    at: datetime


@dataclass(frozen=True)
class ScheduledProgram:
    id: str
    requested_start: datetime
    items: tuple[str, ...]
    state: str = "pending"
    title: str = ""
    description: str = ""
    published: bool = True
    completed_at: datetime | None = None


@dataclass
class ApiSession:
    token: str
    user_id: str
    issued: datetime
    last_activity: datetime


def hash_secret(secret: str, *, salt: bytes | None = None) -> str:
    """Salted one-way digest; plaintext is never persisted."""
    salt = salt if salt is not None else secrets.token_bytes(16)
    digest = hashlib.pbkdf2_hmac(
        "sha256", secret.encode("utf-8"), salt, PBKDF2_ITERATIONS
    )
    return f"pbkdf2${PBKDF2_ITERATIONS}${salt.hex()}${digest.hex()}"


def verify_secret(secret: str, credential: str) -> bool:
    try:
        _, iterations, salt_hex, digest_hex = credential.split("$")
    except ValueError:
        return False
    digest = hashlib.pbkdf2_hmac(
        "sha256", secret.encode("utf-8"), bytes.fromhex(salt_hex), int(iterations)
    )
    return secrets.compare_digest(digest.hex(), digest_hex)


class Catalog:
    """Library store with write-through JSON persistence.

    Mutations take the instance lock and persist before returning; reads
    of returned values are safe because entities are frozen dataclasses.
    A `clock` callable can be injected for deterministic tests.
    """

    def __init__(
        self,
        root: str | os.PathLike,
        *,
        like_lifetime: timedelta = LIKE_LIFETIME,
        like_cooldown: timedelta = LIKE_COOLDOWN,
        session_idle_limit: timedelta = SESSION_IDLE_LIMIT,
        clock: Callable[[], datetime] = utcnow,
    ) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.like_lifetime = like_lifetime
        self.like_cooldown = like_cooldown
        self.session_idle_limit = session_idle_limit
        self.clock = clock
        self._lock = threading.RLock()
        self._tracks: dict[str, Track] = {}
        self._playlist: list[str] = []
        self._users: dict[str, UserAccount] = {}
        self._likes: list[Like] = []
        self._ads: dict[str, Ad] = {}
        self._ad_order: list[str] = []
        self._programs: dict[str, ScheduledProgram] = {}
        self._program_order: list[str] = []
        self._sessions: dict[str, ApiSession] = {}
        self._load()

    # ------------------------------------------------------------------
    # persistence

    def _path(self, name: str) -> Path:
        return self.root / f"{name}.json"

    def _write(self, name: str, payload: object) -> None:
        tmp = self._path(name).with_suffix(".json.tmp")
        tmp.write_text(
            json.dumps(payload, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        os.replace(tmp, self._path(name))

    def _save_songs(self) -> None:
        self._write(
            "songs",
            {
                "songs": [
                    {
                        "id": t.id,
                        "title": t.title,
                        "artist": t.artist,
                        "album": t.album,
                        "genre": t.genre,
                        "lang": t.language,
                        "path": t.path,
                        "added": _iso(t.added),
                        "duration_s": t.duration_s,
                        "bitrate_kbps": t.bitrate_kbps,
                    }
                    for t in self._tracks.values()
                ]
            },
        )

    def _save_playlist(self) -> None:
        self._write("playlist", {"items": list(self._playlist)})

    def _save_user_likes(self) -> None:
        self._write(
            "user_likes",
            {
                "users": [
                    {
                        "id": u.id,
                        "login": u.login,
                        "credential": u.credential,
                        "registered": _iso(u.registered),
                        "last_seen": _iso(u.last_seen),
                    }
                    for u in self._users.values()
                ],
                "likes": [
                    {
                        "user_id": like.user_id,
                        "track_id": like.track_id,
                        "genre": like.genre,
                        "at": _iso(like.at),
                    }
                    for like in self._likes
                ],
            },
        )

    def _save_ads(self) -> None:
        self._write(
            "ads",
            {
                "ads": [
                    {
                        "id": a.id,
                        "path": a.creative_path,
                        "genre": a.target_genre,
                        "url": a.click_url,
                        "count": a.impressions,
                    }
                    for a in (self._ads[i] for i in self._ad_order)
                ]
            },
        )

    def _save_programs(self) -> None:
        self._write(
            "programs",
            {
                "programs": [
                    {
                        "id": p.id,
                        "requested_start": _iso(p.requested_start),
                        "items": list(p.items),
                        "state": p.state,
                        "title": p.title,
                        "description": p.description,
                        "published": p.published,
                        "completed_at": _iso(p.completed_at) if p.completed_at else None,
                    }
                    for p in (self._programs[i] for i in self._program_order)
                ]
            },
        )

    def _load(self) -> None:
        songs = self._read("songs")
        if songs:
            for row in songs.get("songs", []):
                track = Track(
                    id=row["id"],
                    title=row["title"],
                    artist=row["artist"],
                    album=row["album"],
                    genre=row["genre"],
                    language=row["lang"],
                    path=row["path"],
                    added=_from_iso(row["added"]),
                    duration_s=row["duration_s"],
                    bitrate_kbps=row["bitrate_kbps"],
                )
                self._tracks[track.id] = track
        playlist = self._read("playlist")
        if playlist:
            self._playlist = list(playlist.get("items", []))
        user_likes = self._read("user_likes")
        if user_likes:
            for row in user_likes.get("users", []):
                user = UserAccount(
                    id=row["id"],
                    login=row["login"],
                    credential=row["credential"],
                    registered=_from_iso(row["registered"]),
                    last_seen=_from_iso(row["last_seen"]),
                )
                self._users[user.id] = user
            for row in user_likes.get("likes", []):
                self._likes.append(
                    Like(
                        user_id=row["user_id"],
                        track_id=row["track_id"],
                        genre=row["genre"],
                        at=_from_iso(row["at"]),
                    )
                )
        ads = self._read("ads")
        if ads:
            for row in ads.get("ads", []):
                ad = Ad(
                    id=row["id"],
                    creative_path=row["path"],
                    target_genre=row["genre"],
                    click_url=row["url"],
                    impressions=row["count"],
                )
                self._ads[ad.id] = ad
                self._ad_order.append(ad.id)
        programs = self._read("programs")
        if programs:
            for row in programs.get("programs", []):
                program = ScheduledProgram(
                    id=row["id"],
                    requested_start=_from_iso(row["requested_start"]),
                    items=tuple(row["items"]),
                    state=row["state"],
                    title=row.get("title", ""),
                    description=row.get("description", ""),
                    published=row.get("published", True),
                    completed_at=(
                        _from_iso(row["completed_at"]) if row.get("completed_at") else None
                    ),
                )
                self._programs[program.id] = program
                self._program_order.append(program.id)

    def _read(self, name: str) -> dict | None:
        path = self._path(name)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    # ------------------------------------------------------------------
    # ids

    def _new_id(self, prefix: str, taken: Iterable[str], now: datetime) -> str:
        base = f"{prefix}_{int(now.timestamp() * 1000)}"
        taken = set(taken)
        if base not in taken:
            return base
        n = 1
        while f"{base}-{n}" in taken:
            n += 1
        return f"{base}-{n}"

    # ------------------------------------------------------------------
    # tracks

    def add_track(
        self,
        *,
        title: str,
        artist: str = "",
        album: str = "",
        genre: str = "",
        language: str = "",
        file: str | os.PathLike,
        now: datetime | None = None,
    ) -> Track:
        """Parse and register an MP3 file, appending it to the base playlist."""
        now = now or self.clock()
        try:
            info = mp3frame.stream_info(file)
        except OSError as exc:
            raise InvalidTrackFileError(f"unreadable file: {exc}") from exc
        except mp3frame.NoFramesError as exc:
            raise InvalidTrackFileError("no valid frame found") from exc
        with self._lock:
            track = Track(
                id=self._new_id("song", self._tracks, now),
                title=title,
                artist=artist,
                album=album,
                genre=genre,
                language=language,
                path=str(file),
                added=now,
                duration_s=info.total_duration_s,
                bitrate_kbps=info.nominal_bitrate_kbps,
            )
            self._tracks[track.id] = track
            self._playlist.append(track.id)
            self._save_songs()
            self._save_playlist()
            return track

    def track(self, track_id: str) -> Track:
        with self._lock:
            try:
                return self._tracks[track_id]
            except KeyError:
                raise UnknownEntityError(f"unknown track {track_id!r}") from None

    def tracks(self) -> list[Track]:
        with self._lock:
            return list(self._tracks.values())

    def playlist(self) -> list[str]:
        with self._lock:
            return list(self._playlist)

    # ------------------------------------------------------------------
    # users and sessions

    def register_user(
        self, login: str, secret: str, *, now: datetime | None = None
    ) -> UserAccount:
        now = now or self.clock()
        with self._lock:
            if any(u.login == login for u in self._users.values()):
                raise DuplicateLoginError(f"login {login!r} already registered")
            user = UserAccount(
                id=self._new_id("user", self._users, now),
                login=login,
                credential=hash_secret(secret),
                registered=now,
                last_seen=now,
            )
            self._users[user.id] = user
            self._save_user_likes()
            return user

    def authenticate(
        self, login_or_id: str, secret: str, *, now: datetime | None = None
    ) -> str:
        """Check a secret and mint an opaque session token.

        Tokens stay valid until 24 h of inactivity; expiry is lazy, checked
        whenever the token is presented.
        """
        now = now or self.clock()
        with self._lock:
            user = self._users.get(login_or_id)
            if user is None:
                user = next(
                    (u for u in self._users.values() if u.login == login_or_id), None
                )
            if user is None:
                raise UnknownEntityError(f"unknown account {login_or_id!r}")
            if not verify_secret(secret, user.credential):
                raise AuthenticationError("wrong secret")
            self._users[user.id] = replace(user, last_seen=now)
            self._save_user_likes()
            token = secrets.token_hex(16)
            self._sessions[token] = ApiSession(
                token=token, user_id=user.id, issued=now, last_activity=now
            )
            return token

    def session_user(self, token: str, *, now: datetime | None = None) -> UserAccount:
        """Resolve a token, refreshing its activity; expired tokens are purged."""
        now = now or self.clock()
        with self._lock:
            self._purge_sessions(now)
            session = self._sessions.get(token)
            if session is None:
                raise AuthenticationError("invalid or expired token")
            session.last_activity = now
            return self._users[session.user_id]

    def _purge_sessions(self, now: datetime) -> None:
        dead = [
            tok
            for tok, s in self._sessions.items()
            if now - s.last_activity > self.session_idle_limit
        ]
        for tok in dead:
            del self._sessions[tok]

    def user(self, user_id: str) -> UserAccount:
        with self._lock:
            try:
                return self._users[user_id]
            except KeyError:
                raise UnknownEntityError(f"unknown user {user_id!r}") from None

    # ------------------------------------------------------------------
    # likes

    def _purge_likes(self, now: datetime) -> None:
        fresh = [l for l in self._likes if now - l.at <= self.like_lifetime]
        if len(fresh) != len(self._likes):
            self._likes = fresh
            self._save_user_likes()

    def record_like(
        self, user_id: str, track_id: str, *, now: datetime | None = None
    ) -> bool:
        """Store a like unless one by this user for this track is in cooldown.

        Returns True when the vote was stored, False when the cooldown
        suppressed a duplicate. Expired likes are purged on access.
        """
        now = now or self.clock()
        with self._lock:
            if user_id not in self._users:
                raise UnknownEntityError(f"unknown user {user_id!r}")
            track = self._tracks.get(track_id)
            if track is None:
                raise UnknownEntityError(f"unknown track {track_id!r}")
            self._purge_likes(now)
            for like in self._likes:
                if (
                    like.user_id == user_id
                    and like.track_id == track_id
                    and now - like.at < self.like_cooldown
                ):
                    return False
            self._likes.append(
                Like(user_id=user_id, track_id=track_id, genre=track.genre, at=now)
            )
            self._save_user_likes()
            return True

    def live_likes(self, *, now: datetime | None = None) -> list[Like]:
        now = now or self.clock()
        with self._lock:
            self._purge_likes(now)
            return [l for l in self._likes if now - l.at <= self.like_lifetime]

    def liked_genres(
        self, user_id: str, *, now: datetime | None = None
    ) -> list[tuple[str, int]]:
        """Genres the user has live likes in, ordered count desc, name asc."""
        now = now or self.clock()
        with self._lock:
            if user_id not in self._users:
                raise UnknownEntityError(f"unknown user {user_id!r}")
            counts: dict[str, int] = {}
            for like in self.live_likes(now=now):
                if like.user_id == user_id:
                    counts[like.genre] = counts.get(like.genre, 0) + 1
            return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))

    def like_counts(self, *, now: datetime | None = None) -> dict[str, int]:
        """Live like count per track id, across all users."""
        counts: dict[str, int] = {}
        for like in self.live_likes(now=now):
            counts[like.track_id] = counts.get(like.track_id, 0) + 1
        return counts

    def top_songs(
        self, limit: int | None = None, *, now: datetime | None = None
    ) -> list[tuple[Track, int]]:
        """Tracks with at least one live like, count desc, title asc."""
        with self._lock:
            counts = self.like_counts(now=now)
            ranked = sorted(
                ((self._tracks[tid], n) for tid, n in counts.items() if tid in self._tracks),
                key=lambda pair: (-pair[1], pair[0].title),
            )
            return ranked[:limit] if limit is not None else ranked

    def export_stats(
        self, destination: str | os.PathLike | io.TextIOBase, *, now: datetime | None = None
    ) -> None:
        """Write like statistics as RFC 4180 CSV (UTF-8, LF line endings)."""
        rows = self.top_songs(now=now)

        def _emit(fh) -> None:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["title", "genre", "album", "artist", "likes"])
            for track, likes in rows:
                writer.writerow([track.title, track.genre, track.album, track.artist, likes])

        if isinstance(destination, io.TextIOBase):
            _emit(destination)
        else:
            with open(destination, "w", encoding="utf-8", newline="") as fh:
                _emit(fh)

    # ------------------------------------------------------------------
    # ads

    def add_ad(
        self,
        *,
        creative_path: str,
        target_genre: str,
        click_url: str,
        now: datetime | None = None,
    ) -> Ad:
        now = now or self.clock()
        with self._lock:
            ad = Ad(
                id=self._new_id("ad", self._ads, now),
                creative_path=creative_path,
                target_genre=target_genre,
                click_url=click_url,
            )
            self._ads[ad.id] = ad
            self._ad_order.append(ad.id)
            self._save_ads()
            return ad

    def ads(self) -> list[Ad]:
        with self._lock:
            return [self._ads[i] for i in self._ad_order]

    def record_impression(self, ad_id: str) -> int:
        """Increment an ad's impression count; returns the new count."""
        with self._lock:
            ad = self._ads.get(ad_id)
            if ad is None:
                raise UnknownEntityError(f"unknown ad {ad_id!r}")
            updated = replace(ad, impressions=ad.impressions + 1)
            self._ads[ad_id] = updated
            self._save_ads()
            return updated.impressions

    def reset_impressions(self, ad_id: str) -> Ad:
        """Manual campaign restart; the only way a count ever goes down."""
        with self._lock:
            ad = self._ads.get(ad_id)
            if ad is None:
                raise UnknownEntityError(f"unknown ad {ad_id!r}")
            updated = replace(ad, impressions=0)
            self._ads[ad_id] = updated
            self._save_ads()
            return updated

    # ------------------------------------------------------------------
    # programs

    def add_program(
        self,
        items: Sequence[str],
        requested_start: datetime,
        *,
        title: str = "",
        description: str = "",
        published: bool = True,
        now: datetime | None = None,
    ) -> ScheduledProgram:
        now = now or self.clock()
        with self._lock:
            if not items:
                raise CatalogError("a program needs at least one track")
            for tid in items:
                if tid not in self._tracks:
                    raise UnknownEntityError(f"unknown track {tid!r}")
            if requested_start <= now:
                raise CatalogError("requested start must be in the future")
            program = ScheduledProgram(
                id=self._new_id("program", self._programs, now),
                requested_start=requested_start,
                items=tuple(items),
                title=title,
                description=description,
                published=published,
            )
            self._programs[program.id] = program
            self._program_order.append(program.id)
            self._save_programs()
            return program

    def cancel_program(self, program_id: str) -> ScheduledProgram:
        return self._transition_program(program_id, "cancelled")

    def mark_program_playing(self, program_id: str) -> ScheduledProgram:
        return self._transition_program(program_id, "playing")

    def mark_program_done(
        self, program_id: str, *, now: datetime | None = None
    ) -> ScheduledProgram:
        return self._transition_program(program_id, "done", now=now)

    def _transition_program(
        self, program_id: str, state: str, *, now: datetime | None = None
    ) -> ScheduledProgram:
        with self._lock:
            program = self._programs.get(program_id)
            if program is None:
                raise UnknownEntityError(f"unknown program {program_id!r}")
            if (program.state, state) not in _PROGRAM_TRANSITIONS:
                raise ProgramStateError(
                    f"cannot move program from {program.state} to {state}"
                )
            updated = replace(
                program,
                state=state,
                completed_at=(now or self.clock()) if state == "done" else program.completed_at,
            )
            self._programs[program_id] = updated
            self._save_programs()
            return updated

    def program(self, program_id: str) -> ScheduledProgram:
        with self._lock:
            try:
                return self._programs[program_id]
            except KeyError:
                raise UnknownEntityError(f"unknown program {program_id!r}") from None

    def programs(self) -> list[ScheduledProgram]:
        with self._lock:
            return [self._programs[i] for i in self._program_order]

    def pending_programs(self) -> list[ScheduledProgram]:
        """Pending programs ordered by requested start, FIFO on ties."""
        with self._lock:
            pending = [
                (p.requested_start, idx, p)
                for idx, pid in enumerate(self._program_order)
                if (p := self._programs[pid]).state == "pending"
            ]
            return [p for _, _, p in sorted(pending, key=lambda t: (t[0], t[1]))]

    # ------------------------------------------------------------------

    def snapshot(self) -> dict:
        """Comparable view of all five collections (for round-trip tests)."""
        with self._lock:
            return {
                "tracks": dict(self._tracks),
                "playlist": list(self._playlist),
                "users": dict(self._users),
                "likes": list(self._likes),
                "ads": [self._ads[i] for i in self._ad_order],
                "programs": [self._programs[i] for i in self._program_order],
            }
