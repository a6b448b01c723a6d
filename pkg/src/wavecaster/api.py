"""HTTP control plane: accounts, likes, ads, uploads, schedules, stats, feed.

JSON in/out over a threaded HTTP server on its own port; every state
mutation flows through the catalog's atomic operations, so handlers can
run concurrently and the broadcast never stalls on an API error. Also
serves the browser console as static assets under /console/.
"""

from __future__ import annotations

import email
import json
import logging
import mimetypes
import re
import threading
import urllib.parse
import xml.etree.ElementTree as ET
from datetime import datetime, timezone
from email.utils import format_datetime
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from . import adserve, mp3frame, scheduler
from .catalog import (
    AuthenticationError,
    Catalog,
    CatalogError,
    DuplicateLoginError,
    InvalidTrackFileError,
    ProgramStateError,
    ScheduledProgram,
    UnknownEntityError,
)
from .tts import SynthesisError

logger = logging.getLogger(__name__)

DEFAULT_API_PORT = 8089


# ----------------------------------------------------------------------
# podcast feed


def build_podcast_feed(
    programs: list[ScheduledProgram],
    base_url: str,
    *,
    station_name: str = "wavecaster",
    description: str = "Program archive",
    enclosure_length=None,
) -> bytes:
    """Render published, completed programs as an RSS 2.0 feed.

    One item per program, newest first: title, RFC 822 pubDate,
    description, guid, and an enclosure pointing at the program's
    concatenated MP3. Zero items is a valid feed.
    """
    rss = ET.Element("rss", version="2.0")
    channel = ET.SubElement(rss, "channel")
    ET.SubElement(channel, "title").text = station_name
    ET.SubElement(channel, "link").text = base_url
    ET.SubElement(channel, "description").text = description

    episodes = [
        p
        for p in programs
        if p.state == "done" and p.published and p.completed_at is not None
    ]
    episodes.sort(key=lambda p: p.completed_at, reverse=True)
    for program in episodes:
        item = ET.SubElement(channel, "item")
        ET.SubElement(item, "title").text = program.title or program.id
        ET.SubElement(item, "description").text = program.description
        ET.SubElement(item, "pubDate").text = format_datetime(
            program.completed_at.astimezone(timezone.utc)
        )
        guid = ET.SubElement(item, "guid", isPermaLink="false")
        guid.text = program.id
        length = enclosure_length(program) if enclosure_length else 0
        ET.SubElement(
            item,
            "enclosure",
            url=f"{base_url}/api/programs/{program.id}.mp3",
            length=str(length),
            type="audio/mpeg",
        )
    return b'<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(
        rss, encoding="unicode"
    ).encode("utf-8")


# ----------------------------------------------------------------------
# request plumbing


def parse_multipart(content_type: str, body: bytes) -> dict[str, tuple[str | None, bytes]]:
    """Decode multipart/form-data into {field: (filename, bytes)}."""
    prologue = f"Content-Type: {content_type}\r\nMIME-Version: 1.0\r\n\r\n"
    message = email.message_from_bytes(prologue.encode("utf-8") + body)
    if not message.is_multipart():
        raise ValueError("not a multipart body")
    fields: dict[str, tuple[str | None, bytes]] = {}
    for part in message.get_payload():
        name = part.get_param("name", header="content-disposition")
        if name is None:
            continue
        filename = part.get_param("filename", header="content-disposition")
        payload = part.get_payload(decode=True) or b""
        fields[str(name)] = (str(filename) if filename else None, payload)
    return fields


class _HttpError(Exception):
    def __init__(self, status: int, message: str) -> None:
        super().__init__(message)
        self.status = status
        self.message = message


class ApiServer:
    """The control-plane HTTP server."""

    def __init__(
        self,
        catalog: Catalog,
        *,
        host: str = "0.0.0.0",
        port: int = DEFAULT_API_PORT,
        station=None,
        synthesizer=None,
        announce_voice: str = "",
        console_dir: str | Path | None = None,
        stream_url: str = "",
        poll_interval_ms: int = 5000,
        rotation_interval_ms: int = 10000,
    ) -> None:
        self.catalog = catalog
        self.host = host
        self.port = port
        self.station = station
        self.synthesizer = synthesizer
        self.announce_voice = announce_voice
        self.console_dir = Path(console_dir) if console_dir else None
        self.stream_url = stream_url
        self.poll_interval_ms = poll_interval_ms
        self.rotation_interval_ms = rotation_interval_ms
        self._httpd: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        api = self

        class Handler(_ApiHandler):
            server_ref = api

        self._httpd = ThreadingHTTPServer((self.host, self.port), Handler)
        self._httpd.daemon_threads = True
        self.port = self._httpd.server_address[1]
        self._thread = threading.Thread(
            target=lambda: self._httpd.serve_forever(poll_interval=0.05),
            name="api-http",
            daemon=True,
        )
        self._thread.start()
        logger.info("control API listening on %s:%d", self.host, self.port)

    def stop(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    # ------------------------------------------------------------------

    def program_audio(self, program: ScheduledProgram) -> bytes:
        """The program's tracks as one contiguous raw frame stream."""
        out = bytearray()
        for track_id in program.items:
            track = self.catalog.track(track_id)
            for _, raw in mp3frame.iterate_frames(track.path):
                out += raw
        return bytes(out)

    def enclosure_length(self, program: ScheduledProgram) -> int:
        return len(self.program_audio(program))

    def now_playing(self) -> dict:
        if self.station is not None:
            return self.station.now_playing()
        return {
            "title": "",
            "artist": "",
            "genre": "",
            "started": None,
            "stream_url": self.stream_url,
        }


class _ApiHandler(BaseHTTPRequestHandler):
    server_ref: ApiServer

    # --- response helpers -------------------------------------------------

    def log_message(self, fmt, *args):  # route through logging, not stderr
        logger.debug("api: " + fmt, *args)

    def _send(self, status: int, body: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, payload, status: int = 200) -> None:
        self._send(
            status,
            json.dumps(payload).encode("utf-8"),
            "application/json; charset=utf-8",
        )

    def _fail(self, status: int, message: str) -> None:
        self._send_json({"error": message}, status=status)

    # --- request helpers ---------------------------------------------------

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _json_body(self) -> dict:
        raw = self._body()
        if not raw:
            return {}
        try:
            payload = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise _HttpError(400, f"invalid JSON body: {exc}") from exc
        if not isinstance(payload, dict):
            raise _HttpError(400, "JSON body must be an object")
        return payload

    def _multipart_body(self) -> dict[str, tuple[str | None, bytes]]:
        content_type = self.headers.get("Content-Type", "")
        if "multipart/form-data" not in content_type:
            raise _HttpError(400, "expected multipart/form-data")
        try:
            return parse_multipart(content_type, self._body())
        except ValueError as exc:
            raise _HttpError(400, str(exc)) from exc

    def _auth_user(self):
        header = self.headers.get("Authorization", "")
        if not header.startswith("Bearer "):
            raise _HttpError(401, "missing bearer token")
        try:
            return self.server_ref.catalog.session_user(header[len("Bearer "):].strip())
        except AuthenticationError as exc:
            raise _HttpError(401, str(exc)) from exc

    # --- dispatch ------------------------------------------------------------

    def do_GET(self):  # noqa: N802 (stdlib naming)
        self._dispatch("GET")

    def do_POST(self):  # noqa: N802
        self._dispatch("POST")

    def do_DELETE(self):  # noqa: N802
        self._dispatch("DELETE")

    def _dispatch(self, method: str) -> None:
        try:
            path = urllib.parse.urlparse(self.path).path
            handler = self._route(method, path)
            if handler is None:
                self._fail(404, f"no such endpoint: {method} {path}")
                return
            handler()
        except _HttpError as exc:
            self._fail(exc.status, exc.message)
        except UnknownEntityError as exc:
            self._fail(404, str(exc))
        except (BrokenPipeError, ConnectionResetError):
            pass
        except Exception as exc:  # total: anything else is a clean 500
            logger.exception("unhandled API error")
            try:
                self._fail(500, f"internal error: {exc}")
            except OSError:
                pass

    def _route(self, method: str, path: str):
        exact = {
            ("POST", "/api/register"): self._post_register,
            ("POST", "/api/login"): self._post_login,
            ("POST", "/api/like"): self._post_like,
            ("GET", "/api/ads"): self._get_ads,
            ("GET", "/api/now-playing"): self._get_now_playing,
            ("GET", "/api/stats.csv"): self._get_stats_csv,
            ("GET", "/api/feed.rss"): self._get_feed,
            ("POST", "/api/tracks"): self._post_tracks,
            ("POST", "/api/ads"): self._post_ads,
            ("POST", "/api/programs"): self._post_programs,
            ("GET", "/api/programs"): self._get_programs,
            ("POST", "/api/announce"): self._post_announce,
        }
        if (method, path) in exact:
            return exact[(method, path)]
        if match := re.fullmatch(r"/api/programs/([^/]+)\.mp3", path):
            if method == "GET":
                return lambda: self._get_program_audio(match.group(1))
        if match := re.fullmatch(r"/api/programs/([^/]+)", path):
            if method == "DELETE":
                return lambda: self._delete_program(match.group(1))
        if match := re.fullmatch(r"/api/ads/([^/]+)/impression", path):
            if method == "POST":
                return lambda: self._post_impression(match.group(1))
        if match := re.fullmatch(r"/api/ads/([^/]+)/reset", path):
            if method == "POST":
                return lambda: self._post_reset(match.group(1))
        if match := re.fullmatch(r"/api/ads/([^/]+)/creative", path):
            if method == "GET":
                return lambda: self._get_creative(match.group(1))
        if method == "GET" and (path == "/console" or path.startswith("/console/")):
            return lambda: self._get_console(path)
        return None

    # --- accounts ------------------------------------------------------------

    def _post_register(self) -> None:
        body = self._json_body()
        login = body.get("login", "")
        secret = body.get("secret", "")
        if not login or not secret:
            raise _HttpError(400, "login and secret are required")
        try:
            user = self.server_ref.catalog.register_user(login, secret)
        except DuplicateLoginError as exc:
            raise _HttpError(409, str(exc)) from exc
        self._send_json({"user_id": user.id, "login": user.login}, status=201)

    def _post_login(self) -> None:
        body = self._json_body()
        try:
            token = self.server_ref.catalog.authenticate(
                body.get("login", ""), body.get("secret", "")
            )
        except (UnknownEntityError, AuthenticationError) as exc:
            raise _HttpError(401, str(exc)) from exc
        self._send_json({"token": token})

    # --- likes and ads ---------------------------------------------------------

    def _post_like(self) -> None:
        user = self._auth_user()
        body = self._json_body()
        track_id = body.get("track_id", "")
        accepted = self.server_ref.catalog.record_like(user.id, track_id)
        self._send_json({"accepted": accepted})

    def _get_ads(self) -> None:
        user = self._auth_user()
        catalog = self.server_ref.catalog
        liked = [genre for genre, _ in catalog.liked_genres(user.id)]
        selection = adserve.select_ads(catalog.ads(), liked)
        self._send_json(
            {
                "ads": [
                    {
                        "id": ad.id,
                        "target_genre": ad.target_genre,
                        "click_url": ad.click_url,
                        "creative_url": f"/api/ads/{ad.id}/creative",
                    }
                    for ad in selection
                ]
            }
        )

    def _post_impression(self, ad_id: str) -> None:
        self._auth_user()
        count = self.server_ref.catalog.record_impression(ad_id)
        self._send_json({"impressions": count})

    def _post_reset(self, ad_id: str) -> None:
        self._auth_user()
        ad = self.server_ref.catalog.reset_impressions(ad_id)
        self._send_json({"impressions": ad.impressions})

    def _get_creative(self, ad_id: str) -> None:
        ad = self.server_ref.catalog.ads()
        match = next((a for a in ad if a.id == ad_id), None)
        if match is None:
            raise _HttpError(404, f"unknown ad {ad_id!r}")
        path = Path(match.creative_path)
        if not path.exists():
            raise _HttpError(404, "creative file missing")
        content_type = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
        self._send(200, path.read_bytes(), content_type)

    # --- playback state ---------------------------------------------------------

    def _get_now_playing(self) -> None:
        self._send_json(self.server_ref.now_playing())

    def _get_stats_csv(self) -> None:
        self._auth_user()
        import io

        buffer = io.StringIO()
        self.server_ref.catalog.export_stats(buffer)
        self._send(200, buffer.getvalue().encode("utf-8"), "text/csv; charset=utf-8")

    def _get_feed(self) -> None:
        server = self.server_ref
        base = f"http://{self.headers.get('Host', f'{server.host}:{server.port}')}"
        feed = build_podcast_feed(
            server.catalog.programs(),
            base,
            station_name=getattr(server.station, "station_name", "wavecaster"),
            enclosure_length=server.enclosure_length,
        )
        self._send(200, feed, "application/rss+xml; charset=utf-8")

    # --- uploads -------------------------------------------------------------

    def _post_tracks(self) -> None:
        self._auth_user()
        fields = self._multipart_body()
        if "file" not in fields:
            raise _HttpError(400, "missing file field")
        filename, data = fields["file"]
        if not data:
            raise _HttpError(400, "empty upload")

        def text(name: str) -> str:
            return fields.get(name, (None, b""))[1].decode("utf-8", errors="replace")

        audio_dir = self.server_ref.catalog.root / "audio"
        audio_dir.mkdir(exist_ok=True)
        safe = re.sub(r"[^\w.-]", "_", filename or "upload.mp3")
        target = audio_dir / f"{datetime.now(timezone.utc).timestamp():.6f}_{safe}"
        target.write_bytes(data)
        try:
            track = self.server_ref.catalog.add_track(
                title=text("title") or (filename or "untitled"),
                artist=text("artist"),
                album=text("album"),
                genre=text("genre"),
                language=text("language"),
                file=target,
            )
        except InvalidTrackFileError as exc:
            target.unlink(missing_ok=True)
            raise _HttpError(400, str(exc)) from exc
        if self.server_ref.station is not None:
            self.server_ref.station.refresh_playlist()
        self._send_json(_track_json(track), status=201)

    def _post_ads(self) -> None:
        self._auth_user()
        fields = self._multipart_body()
        if "file" not in fields:
            raise _HttpError(400, "missing file field")
        filename, data = fields["file"]

        def text(name: str) -> str:
            return fields.get(name, (None, b""))[1].decode("utf-8", errors="replace")

        if not text("target_genre"):
            raise _HttpError(400, "target_genre is required")
        creative_dir = self.server_ref.catalog.root / "creatives"
        creative_dir.mkdir(exist_ok=True)
        safe = re.sub(r"[^\w.-]", "_", filename or "creative.bin")
        target = creative_dir / f"{datetime.now(timezone.utc).timestamp():.6f}_{safe}"
        target.write_bytes(data)
        ad = self.server_ref.catalog.add_ad(
            creative_path=str(target),
            target_genre=text("target_genre"),
            click_url=text("click_url"),
        )
        self._send_json(
            {
                "id": ad.id,
                "target_genre": ad.target_genre,
                "click_url": ad.click_url,
                "impressions": ad.impressions,
            },
            status=201,
        )

    # --- programs ---------------------------------------------------------------

    def _post_programs(self) -> None:
        self._auth_user()
        body = self._json_body()
        items = body.get("items")
        start_raw = body.get("requested_start", "")
        if not isinstance(items, list) or not items:
            raise _HttpError(400, "items must be a non-empty list of track ids")
        try:
            requested_start = datetime.fromisoformat(start_raw)
        except (TypeError, ValueError) as exc:
            raise _HttpError(400, "requested_start must be an ISO-8601 timestamp") from exc
        if requested_start.tzinfo is None:
            requested_start = requested_start.replace(tzinfo=timezone.utc)
        try:
            if self.server_ref.station is not None:
                program = self.server_ref.station.enqueue_program(
                    items,
                    requested_start,
                    title=body.get("title", ""),
                    description=body.get("description", ""),
                    published=bool(body.get("published", True)),
                )
            else:
                program = self.server_ref.catalog.add_program(
                    items,
                    requested_start,
                    title=body.get("title", ""),
                    description=body.get("description", ""),
                    published=bool(body.get("published", True)),
                )
        except UnknownEntityError as exc:
            raise _HttpError(404, str(exc)) from exc
        except CatalogError as exc:
            raise _HttpError(400, str(exc)) from exc
        self._send_json(_program_json(program), status=201)

    def _get_programs(self) -> None:
        self._auth_user()
        self._send_json(
            {"programs": [_program_json(p) for p in self.server_ref.catalog.programs()]}
        )

    def _delete_program(self, program_id: str) -> None:
        self._auth_user()
        try:
            if self.server_ref.station is not None:
                self.server_ref.station.cancel_program(program_id)
            else:
                self.server_ref.catalog.cancel_program(program_id)
        except ProgramStateError as exc:
            raise _HttpError(409, str(exc)) from exc
        self._send_json({"cancelled": program_id})

    def _get_program_audio(self, program_id: str) -> None:
        program = self.server_ref.catalog.program(program_id)
        self._send(200, self.server_ref.program_audio(program), "audio/mpeg")

    # --- announcements -------------------------------------------------------------

    def _post_announce(self) -> None:
        self._auth_user()
        body = self._json_body()
        text = body.get("text", "")
        voice = body.get("voice", "") or self.server_ref.announce_voice
        if not text or not text.strip():
            raise _HttpError(400, "text must be non-empty")
        synthesizer = self.server_ref.synthesizer
        if synthesizer is None:
            raise _HttpError(503, "no synthesizer configured")
        try:
            track = scheduler.make_announcement(
                text, voice, synthesizer, self.server_ref.catalog
            )
        except SynthesisError as exc:
            raise _HttpError(502, str(exc)) from exc
        except InvalidTrackFileError as exc:
            raise _HttpError(502, f"synthesizer output rejected: {exc}") from exc
        if self.server_ref.station is not None:
            self.server_ref.station.refresh_playlist()
        self._send_json(_track_json(track), status=201)

    # --- console assets ---------------------------------------------------------------

    def _get_console(self, path: str) -> None:
        server = self.server_ref
        rel = path[len("/console"):].lstrip("/")
        if rel == "bootstrap.json":
            self._send_json(
                {
                    "apiBaseUrl": "",
                    "streamUrl": server.stream_url,
                    "pollIntervalMs": server.poll_interval_ms,
                    "rotationIntervalMs": server.rotation_interval_ms,
                }
            )
            return
        if server.console_dir is None:
            raise _HttpError(404, "console assets not configured")
        root = server.console_dir.resolve()
        target = (root / (rel or "index.html")).resolve()
        if not str(target).startswith(str(root)) or not target.is_file():
            raise _HttpError(404, "no such asset")
        content_type = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        self._send(200, target.read_bytes(), content_type)


def _track_json(track) -> dict:
    return {
        "id": track.id,
        "title": track.title,
        "artist": track.artist,
        "album": track.album,
        "genre": track.genre,
        "language": track.language,
        "duration_s": track.duration_s,
        "bitrate_kbps": track.bitrate_kbps,
    }


def _program_json(program: ScheduledProgram) -> dict:
    return {
        "id": program.id,
        "requested_start": program.requested_start.isoformat(),
        "items": list(program.items),
        "state": program.state,
        "title": program.title,
        "description": program.description,
        "published": program.published,
        "completed_at": program.completed_at.isoformat() if program.completed_at else None,
    }
