"""ICY wire protocol and broadcast fan-out.

One producer paces parsed MP3 frames into a shared ring; every listener
session gets the ring's recent audio as a connect burst and then each new
packet exactly once, in order, with in-band title metadata injected at
metaint boundaries when the client asked for it. A session too slow to
drain its queue within the ring horizon gets disconnected; nothing a
listener does can stall the producer or its peers.
"""

from __future__ import annotations

import logging
import math
import queue
import re
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

logger = logging.getLogger(__name__)

DEFAULT_STREAM_PORT = 8000
DEFAULT_METAINT = 8192
DEFAULT_RING_SECONDS = 10.0
SEND_TIMEOUT_S = 10.0
# A metadata block is 1 length byte + up to 255*16 payload bytes.
MAX_META_PAYLOAD = 255 * 16

_ICY_METADATA_RE = re.compile(r"^icy-metadata\s*:\s*1\s*$", re.IGNORECASE | re.MULTILINE)


class HandshakeError(Exception):
    """Listener request rejected; `response` (if any) is sent before close."""

    def __init__(self, reason: str, response: bytes | None = None) -> None:
        super().__init__(reason)
        self.response = response


# ----------------------------------------------------------------------
# protocol encoding


def parse_listener_request(request_text: str) -> bool:
    """Validate a raw listener request; returns wants_metadata.

    Requests without an HTTP token are dropped silently; anything but GET
    is answered with a 405 before closing.
    """
    if "HTTP" not in request_text[1:]:
        raise HandshakeError("no HTTP token in request")
    if "get" not in request_text.lower():
        raise HandshakeError(
            "only GET is supported",
            response=b"HTTP/1.0 405 Method Not Allowed\r\n\r\n",
        )
    return bool(_ICY_METADATA_RE.search(request_text))


def build_icy_response(
    station_name: str,
    genre: str,
    bitrate_kbps: int,
    metaint: int,
    request_text: str,
) -> bytes:
    """Build the ICY handshake response for a validated GET request.

    icy-metaint is advertised only when the request carried
    `Icy-MetaData: 1`; without it the session sends pure audio.
    """
    wants_metadata = parse_listener_request(request_text)
    lines = [
        "ICY 200 OK",
        f"icy-name: {station_name}",
        f"icy-genre: {genre}",
        f"icy-br: {bitrate_kbps}",
        "icy-pub: 0",
    ]
    if wants_metadata:
        lines.append(f"icy-metaint: {metaint}")
    return ("\r\n".join(lines) + "\r\n\r\n").encode("utf-8")


def encode_metadata_block(title: str) -> bytes:
    """Encode one in-band metadata block announcing a title change.

    Payload is `StreamTitle='<title>';` NUL-padded to a multiple of 16,
    preceded by the length byte k = ceil(len/16). Single quotes in titles
    are dropped; over-long titles are truncated to the block limit.
    """
    clean = title.replace("'", "")
    payload = f"StreamTitle='{clean}';".encode("utf-8")
    if len(payload) > MAX_META_PAYLOAD:
        budget = MAX_META_PAYLOAD - len(b"StreamTitle='';")
        payload = b"StreamTitle='" + clean.encode("utf-8")[:budget] + b"';"
    k = math.ceil(len(payload) / 16)
    return bytes([k]) + payload.ljust(k * 16, b"\x00")


# ----------------------------------------------------------------------
# packets and the ring


@dataclass(frozen=True)
class StreamPacket:
    seq: int
    data: bytes
    duration_s: float
    title: str


class Subscription:
    """One listener's bounded view of new packets."""

    def __init__(self, maxsize: int) -> None:
        self.queue: queue.Queue[StreamPacket] = queue.Queue(maxsize=maxsize)
        self.dropped = threading.Event()

    def get(self, timeout: float | None = None) -> StreamPacket | None:
        try:
            return self.queue.get(timeout=timeout)
        except queue.Empty:
            return None


class BroadcastRing:
    """Most recent <= capacity seconds of audio, fanned out to subscribers.

    Single producer; packets are immutable, so readers can never observe a
    torn write. A subscriber whose queue overflows is marked dropped and
    skipped from then on.
    """

    def __init__(self, capacity_seconds: float = DEFAULT_RING_SECONDS) -> None:
        self.capacity_seconds = capacity_seconds
        self._lock = threading.Lock()
        self._packets: list[StreamPacket] = []
        self._duration = 0.0
        self._seq = 0
        self._subscribers: list[Subscription] = []

    def publish(self, data: bytes, duration_s: float, title: str) -> StreamPacket:
        packet = StreamPacket(self._seq, bytes(data), duration_s, title)
        with self._lock:
            self._seq += 1
            self._packets.append(packet)
            self._duration += duration_s
            while self._packets and self._duration > self.capacity_seconds:
                gone = self._packets.pop(0)
                self._duration -= gone.duration_s
            subscribers = list(self._subscribers)
        for sub in subscribers:
            if sub.dropped.is_set():
                continue
            try:
                sub.queue.put_nowait(packet)
            except queue.Full:
                sub.dropped.set()
        return packet

    def snapshot(self) -> list[StreamPacket]:
        with self._lock:
            return list(self._packets)

    def attach(self) -> tuple[list[StreamPacket], Subscription]:
        """Atomically snapshot the ring and subscribe for what follows."""
        maxsize = max(64, int(self.capacity_seconds / 0.020))
        sub = Subscription(maxsize)
        with self._lock:
            burst = list(self._packets)
            self._subscribers.append(sub)
        return burst, sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)

    @property
    def subscriber_count(self) -> int:
        with self._lock:
            return len(self._subscribers)


# ----------------------------------------------------------------------
# listener sessions


class ListenerSession:
    """State for one connected listener."""

    def __init__(
        self,
        conn: socket.socket,
        *,
        wants_metadata: bool,
        metaint: int = DEFAULT_METAINT,
    ) -> None:
        self.conn = conn
        self.wants_metadata = wants_metadata
        self.metaint = metaint
        self.bytes_since_meta = 0
        self.last_sent_title: str | None = None


def wrap_with_metadata(audio: bytes, session: ListenerSession, title: str) -> bytes:
    """Interleave metadata blocks into audio at the session's metaint cadence.

    An unchanged title encodes as a single 0x00 byte. The session counter
    carries across calls so block offsets stay exact over the whole
    connection.
    """
    if not session.wants_metadata:
        return audio
    out = bytearray()
    pos = 0
    while pos < len(audio):
        room = session.metaint - session.bytes_since_meta
        take = min(room, len(audio) - pos)
        out += audio[pos:pos + take]
        session.bytes_since_meta += take
        pos += take
        if session.bytes_since_meta == session.metaint:
            if title != session.last_sent_title:
                out += encode_metadata_block(title)
                session.last_sent_title = title
            else:
                out += b"\x00"
            session.bytes_since_meta = 0
    return bytes(out)


# ----------------------------------------------------------------------
# pacing

Frame = tuple[bytes, float]  # raw bytes, duration seconds


def pace_schedule(
    frames: Iterable[Frame], t0: float = 0.0
) -> list[tuple[Frame, float]]:
    """Absolute send deadline per frame: t0 plus all earlier durations.

    Scheduling against absolute deadlines keeps cumulative drift bounded
    by per-sleep jitter rather than growing with frame count.
    """
    out = []
    t = t0
    for frame in frames:
        out.append((frame, t))
        t += frame[1]
    return out


class PacedPublisher:
    """Publishes frames to a ring no later than their deadlines."""

    def __init__(
        self,
        ring: BroadcastRing,
        *,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.ring = ring
        self.clock = clock
        self.sleep = sleep
        self.next_deadline: float | None = None
        self.max_lateness_s = 0.0

    def play(
        self,
        frames: Iterable[Frame],
        title: str,
        *,
        should_stop: Callable[[], bool] | None = None,
    ) -> None:
        """Pace one track's frames into the ring under the given title."""
        now = self.clock()
        if self.next_deadline is None or self.next_deadline < now - 1.0:
            self.next_deadline = now
        for data, duration in frames:
            if should_stop is not None and should_stop():
                return
            delay = self.next_deadline - self.clock()
            if delay > 0:
                self.sleep(delay)
            lateness = self.clock() - self.next_deadline
            if lateness > self.max_lateness_s:
                self.max_lateness_s = lateness
            self.ring.publish(data, duration, title)
            self.next_deadline += duration


# ----------------------------------------------------------------------
# capacity model


@dataclass(frozen=True)
class BandwidthModel:
    """Outbound demand for n listeners at a bitrate plus sync overhead."""

    n: int
    stream_kbps: float
    sync_kbps: float

    @property
    def total_kbps(self) -> float:
        return estimate_bandwidth(self.n, self.stream_kbps, self.sync_kbps)


def estimate_bandwidth(n: int, stream_kbps: float, sync_kbps: float) -> float:
    """Total outbound kbps for n listeners: n × (stream + per-listener sync)."""
    if n < 0 or stream_kbps < 0 or sync_kbps < 0:
        raise ValueError("inputs must be non-negative")
    return n * (stream_kbps + sync_kbps)


def capacity(uplink_kbps: float, stream_kbps: float, sync_kbps: float) -> int:
    """Most listeners a given uplink can carry at a bitrate plus overhead."""
    per_listener = stream_kbps + sync_kbps
    if per_listener <= 0:
        raise ValueError("per-listener rate must be positive")
    return int(uplink_kbps // per_listener)


# ----------------------------------------------------------------------
# the stream server


class IcyStreamServer:
    """Accepts listeners on one port and relays the ring to all of them."""

    def __init__(
        self,
        ring: BroadcastRing,
        *,
        station_name: str = "wavecaster",
        genre: str = "Various",
        bitrate_kbps: int = 128,
        host: str = "0.0.0.0",
        port: int = DEFAULT_STREAM_PORT,
        metaint: int = DEFAULT_METAINT,
        max_listeners: int | None = None,
        send_timeout_s: float = SEND_TIMEOUT_S,
    ) -> None:
        self.ring = ring
        self.station_name = station_name
        self.genre = genre
        self.bitrate_kbps = bitrate_kbps
        self.host = host
        self.port = port
        self.metaint = metaint
        self.max_listeners = max_listeners
        self.send_timeout_s = send_timeout_s
        self._sock: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._stopping = threading.Event()
        self._sessions_lock = threading.Lock()
        self._session_threads: list[threading.Thread] = []
        self.listener_count = 0

    def start(self) -> None:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((self.host, self.port))
        sock.listen(32)
        sock.settimeout(0.2)  # lets the accept loop notice stop()
        self.port = sock.getsockname()[1]  # resolves port 0 to the real one
        self._sock = sock
        self._stopping.clear()
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="icy-accept", daemon=True
        )
        self._accept_thread.start()
        logger.info("stream server listening on %s:%d", self.host, self.port)

    def stop(self) -> None:
        self._stopping.set()
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=5)
        with self._sessions_lock:
            threads = list(self._session_threads)
        for thread in threads:
            thread.join(timeout=5)

    def _accept_loop(self) -> None:
        assert self._sock is not None
        while not self._stopping.is_set():
            try:
                conn, addr = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            thread = threading.Thread(
                target=self._run_session, args=(conn, addr), daemon=True
            )
            with self._sessions_lock:
                self._session_threads.append(thread)
            thread.start()

    def _read_request(self, conn: socket.socket) -> str:
        conn.settimeout(5.0)
        data = bytearray()
        while b"\r\n\r\n" not in data and len(data) < 4096:
            chunk = conn.recv(1024)
            if not chunk:
                break
            data += chunk
        return data.decode("utf-8", errors="replace")

    def _run_session(self, conn: socket.socket, addr) -> None:
        session: ListenerSession | None = None
        sub: Subscription | None = None
        try:
            request = self._read_request(conn)
            try:
                wants_metadata = parse_listener_request(request)
            except HandshakeError as exc:
                if exc.response:
                    conn.sendall(exc.response)
                logger.info("rejected %s: %s", addr, exc)
                return
            with self._sessions_lock:
                if (
                    self.max_listeners is not None
                    and self.listener_count >= self.max_listeners
                ):
                    conn.sendall(b"HTTP/1.0 503 Service Full\r\n\r\n")
                    logger.info("turned away %s: station full", addr)
                    return
                self.listener_count += 1
            session = ListenerSession(
                conn, wants_metadata=wants_metadata, metaint=self.metaint
            )
            conn.sendall(
                build_icy_response(
                    self.station_name,
                    self.genre,
                    self.bitrate_kbps,
                    self.metaint,
                    request,
                )
            )
            conn.settimeout(self.send_timeout_s)
            burst, sub = self.ring.attach()
            last_seq = -1
            for packet in burst:
                conn.sendall(wrap_with_metadata(packet.data, session, packet.title))
                last_seq = packet.seq
            while not self._stopping.is_set():
                if sub.dropped.is_set():
                    logger.info("dropping %s: slower than the ring horizon", addr)
                    break
                packet = sub.get(timeout=0.5)
                if packet is None:
                    continue
                if packet.seq <= last_seq:
                    continue
                conn.sendall(wrap_with_metadata(packet.data, session, packet.title))
                last_seq = packet.seq
        except OSError as exc:
            logger.info("listener %s gone: %s", addr, exc)
        finally:
            if sub is not None:
                self.ring.unsubscribe(sub)
            try:
                conn.close()
            except OSError:
                pass
            with self._sessions_lock:
                if session is not None:
                    self.listener_count -= 1
                current = threading.current_thread()
                if current in self._session_threads:
                    self._session_threads.remove(current)
