"""radiobench: a protocol-correct listener swarm for load and integrity tests.

Each simulated listener performs a real ICY handshake with metadata
enabled, strips the in-band blocks, verifies the remaining bytes are
contiguous MP3 frames, and measures throughput. After the GET request a
listener never sends another byte, so any overhead measured is the
server's. Reports compare aggregate outbound against n × (bitrate +
per-listener sync overhead).
"""

from __future__ import annotations

import argparse
import json
import socket
import sys
import threading
import time
import urllib.parse
from dataclasses import asdict, dataclass, field

from . import mp3frame
from .streamer import estimate_bandwidth

DEFAULT_WARMUP_S = 5.0
RECV_CHUNK = 8192


class HarnessError(Exception):
    pass


# ----------------------------------------------------------------------
# incremental ICY demuxing


class IcyDemuxer:
    """Splits a post-handshake ICY body into audio bytes and title events.

    Tracks wire and audio offsets so metadata block positions can be
    checked against the advertised metaint exactly.
    """

    def __init__(self, metaint: int) -> None:
        if metaint <= 0:
            raise ValueError("metaint must be positive")
        self.metaint = metaint
        self.audio = bytearray()
        self.titles: list[tuple[str, int]] = []  # (title, audio offset)
        self.blocks: list[tuple[int, int]] = []  # (wire offset, block size)
        self._wire_pos = 0
        self._audio_until_meta = metaint
        self._pending = bytearray()
        self._meta_need: int | None = None

    def feed(self, chunk: bytes) -> None:
        self._pending += chunk
        while True:
            if self._meta_need is None:
                if self._audio_until_meta > 0:
                    take = min(self._audio_until_meta, len(self._pending))
                    if take == 0:
                        return
                    self.audio += self._pending[:take]
                    del self._pending[:take]
                    self._audio_until_meta -= take
                    self._wire_pos += take
                    if self._audio_until_meta > 0:
                        return
                if not self._pending:
                    return
                length = self._pending[0]
                self._meta_need = 1 + length * 16
            if len(self._pending) < self._meta_need:
                return
            block = bytes(self._pending[: self._meta_need])
            del self._pending[: self._meta_need]
            self.blocks.append((self._wire_pos, self._meta_need))
            self._wire_pos += self._meta_need
            self._meta_need = None
            self._audio_until_meta = self.metaint
            if len(block) > 1:
                title = _parse_stream_title(block[1:])
                if title is not None:
                    self.titles.append((title, len(self.audio)))


def _parse_stream_title(payload: bytes) -> str | None:
    text = payload.rstrip(b"\x00").decode("utf-8", errors="replace")
    marker = "StreamTitle='"
    start = text.find(marker)
    if start < 0:
        return None
    end = text.find("';", start + len(marker))
    if end < 0:
        return None
    return text[start + len(marker):end]


def parse_icy_headers(header_blob: bytes) -> dict[str, str]:
    lines = header_blob.decode("utf-8", errors="replace").split("\r\n")
    headers: dict[str, str] = {}
    for line in lines[1:]:
        if ":" in line:
            key, value = line.split(":", 1)
            headers[key.strip().lower()] = value.strip()
    return headers


# Largest legal MPEG-1 Layer III frame (320 kbps @ 32 kHz, padded).
_MAX_FRAME_LEN = 1441


def verify_frame_alignment(audio: bytes) -> tuple[int, int, bool]:
    """(frames recovered, aligned byte count, ok) for a de-metadata'd stream.

    ok means the audio is a clean frame sequence with at most one
    truncated frame at the disconnect point: no junk, no resync.
    """
    frames = 0
    aligned = 0
    ok = True
    events = list(mp3frame._scan(audio))
    for i, event in enumerate(events):
        if event[0] == "frame":
            frames += 1
            aligned += len(event[2])
            continue
        truncated_tail = (
            i == len(events) - 1
            and aligned + event[1] == len(audio)
            and event[1] < _MAX_FRAME_LEN
        )
        if not truncated_tail:
            ok = False
    return frames, aligned, ok


# ----------------------------------------------------------------------
# reports


@dataclass
class ListenerReport:
    listener_id: int
    bytes_received: int = 0
    audio_bytes: int = 0
    frames_recovered: int = 0
    mean_throughput_kbps: float = 0.0
    wire_throughput_kbps: float = 0.0
    titles: list = field(default_factory=list)
    meta_block_offsets: list = field(default_factory=list)
    header: dict = field(default_factory=dict)
    alignment_ok: bool = False
    disconnect_reason: str = ""


@dataclass
class SwarmReport:
    n: int
    listeners: list = field(default_factory=list)
    aggregate_kbps: float = 0.0
    expected_bitrate_kbps: float | None = None
    measured_sync_kbps: float = 0.0
    model_kbps: float = 0.0
    model_residual: float = 0.0
    ok: bool = True
    failures: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


# ----------------------------------------------------------------------
# the listener


def _parse_url(url: str) -> tuple[str, int, str]:
    parsed = urllib.parse.urlparse(url)
    if parsed.scheme not in ("http", "icy", ""):
        raise HarnessError(f"unsupported scheme in {url!r}")
    host = parsed.hostname or "127.0.0.1"
    port = parsed.port or 8000
    path = parsed.path or "/"
    return host, port, path


def run_listener(
    url: str,
    seconds: float,
    *,
    listener_id: int = 0,
    warmup_s: float = DEFAULT_WARMUP_S,
    kill_at: float | None = None,
    keep_raw: bool = False,
) -> ListenerReport:
    """Connect one listener, strip metadata, and measure for `seconds`."""
    host, port, path = _parse_url(url)
    report = ListenerReport(listener_id=listener_id)
    raw = bytearray()
    start = time.monotonic()
    try:
        conn = socket.create_connection((host, port), timeout=10)
    except OSError as exc:
        report.disconnect_reason = f"connect failed: {exc}"
        return report
    try:
        conn.settimeout(5.0)
        request = (
            f"GET {path} HTTP/1.0\r\n"
            f"Host: {host}:{port}\r\n"
            "Icy-MetaData: 1\r\n"
            "User-Agent: radiobench\r\n"
            "\r\n"
        ).encode("utf-8")
        conn.sendall(request)

        blob = bytearray()
        while b"\r\n\r\n" not in blob:
            chunk = conn.recv(1024)
            if not chunk:
                report.disconnect_reason = "closed during handshake"
                return report
            blob += chunk
            if len(blob) > 16384:
                report.disconnect_reason = "oversized handshake"
                return report
        head, _, rest = bytes(blob).partition(b"\r\n\r\n")
        if not head.startswith(b"ICY 200 OK"):
            report.disconnect_reason = f"handshake not ICY: {head[:40]!r}"
            return report
        report.header = parse_icy_headers(head)
        metaint = int(report.header.get("icy-metaint", "0") or "0")
        if metaint <= 0:
            report.disconnect_reason = "server did not advertise icy-metaint"
            return report
        if keep_raw:
            raw += head + b"\r\n\r\n"

        demux = IcyDemuxer(metaint)
        samples: list[tuple[float, int, int]] = []  # (t, wire bytes, audio bytes)
        wire = 0

        def note(data: bytes) -> None:
            nonlocal wire
            wire += len(data)
            demux.feed(data)
            if keep_raw:
                raw.extend(data)
            samples.append((time.monotonic() - start, wire, len(demux.audio)))

        note(rest)
        deadline = start + seconds
        reason = "completed"
        while True:
            now = time.monotonic()
            if now >= deadline:
                break
            if kill_at is not None and now - start >= kill_at:
                reason = "killed"
                break
            try:
                chunk = conn.recv(RECV_CHUNK)
            except socket.timeout:
                reason = "receive timeout"
                break
            except OSError as exc:
                reason = f"socket error: {exc}"
                break
            if not chunk:
                reason = "server closed"
                break
            note(chunk)
        report.disconnect_reason = reason
    finally:
        try:
            conn.close()
        except OSError:
            pass

    report.bytes_received = wire
    report.audio_bytes = len(demux.audio)
    report.titles = [list(t) for t in demux.titles]
    header_len = len(head) + 4
    report.meta_block_offsets = [
        [header_len + off, size] for off, size in demux.blocks
    ]
    frames, _, ok = (
        verify_frame_alignment(bytes(demux.audio)) if demux.audio else (0, 0, True)
    )
    report.frames_recovered = frames
    report.alignment_ok = ok

    end_t = samples[-1][0] if samples else 0.0
    window = [s for s in samples if s[0] >= min(warmup_s, end_t / 2)]
    if len(window) >= 2:
        dt = window[-1][0] - window[0][0]
        if dt > 0:
            report.wire_throughput_kbps = (window[-1][1] - window[0][1]) * 8 / dt / 1000
            report.mean_throughput_kbps = (window[-1][2] - window[0][2]) * 8 / dt / 1000
    if keep_raw:
        # plain attribute, not a field: raw captures stay out of JSON reports
        report.raw_capture = bytes(raw)
    return report


# ----------------------------------------------------------------------
# the swarm


def run_load_test(
    url: str,
    n: int,
    seconds: float,
    *,
    expect_bitrate: float | None = None,
    max_sync_kbps: float | None = None,
    warmup_s: float = DEFAULT_WARMUP_S,
    kill: dict[int, float] | None = None,
) -> SwarmReport:
    """Run n concurrent listeners and evaluate the stated expectations."""
    report = SwarmReport(n=n, expected_bitrate_kbps=expect_bitrate)
    if n == 0:
        return report
    kill = kill or {}
    results: list[ListenerReport | None] = [None] * n

    def work(idx: int) -> None:
        results[idx] = run_listener(
            url,
            seconds,
            listener_id=idx,
            warmup_s=warmup_s,
            kill_at=kill.get(idx),
        )

    threads = [threading.Thread(target=work, args=(i,)) for i in range(n)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()

    listeners = [r for r in results if r is not None]
    report.listeners = [asdict(r) for r in listeners]

    healthy = [
        r
        for r in listeners
        if r.disconnect_reason == "completed" and r.mean_throughput_kbps > 0
    ]
    for r in listeners:
        if r.disconnect_reason.startswith(("connect failed", "handshake not")):
            report.failures.append(
                f"listener {r.listener_id}: {r.disconnect_reason}"
            )
        if not r.alignment_ok:
            report.failures.append(
                f"listener {r.listener_id}: frame alignment broken"
            )

    if healthy:
        report.aggregate_kbps = sum(r.wire_throughput_kbps for r in healthy)
        if expect_bitrate is not None:
            overheads = [
                max(0.0, r.wire_throughput_kbps - r.mean_throughput_kbps)
                for r in healthy
            ]
            report.measured_sync_kbps = sum(overheads) / len(overheads)
            report.model_kbps = estimate_bandwidth(
                len(healthy), expect_bitrate, report.measured_sync_kbps
            )
            if report.model_kbps > 0:
                report.model_residual = (
                    abs(report.aggregate_kbps - report.model_kbps) / report.model_kbps
                )
            for r in healthy:
                rel = abs(r.mean_throughput_kbps - expect_bitrate) / expect_bitrate
                if rel > 0.05:
                    report.failures.append(
                        f"listener {r.listener_id}: throughput "
                        f"{r.mean_throughput_kbps:.1f} kbps off nominal by {rel:.1%}"
                    )
            if report.model_residual > 0.10:
                report.failures.append(
                    f"aggregate {report.aggregate_kbps:.1f} kbps deviates "
                    f"{report.model_residual:.1%} from model {report.model_kbps:.1f}"
                )
            if max_sync_kbps is not None and report.measured_sync_kbps > max_sync_kbps:
                report.failures.append(
                    f"sync overhead {report.measured_sync_kbps:.2f} kbps exceeds "
                    f"{max_sync_kbps}"
                )
    elif n > 0:
        report.failures.append("no healthy listeners")

    report.ok = not report.failures
    return report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="radiobench",
        description="Spawn protocol-correct ICY listeners and verify the stream.",
    )
    parser.add_argument("--url", required=True, help="ICY stream URL")
    parser.add_argument("--listeners", type=int, default=1)
    parser.add_argument("--seconds", type=float, default=30.0)
    parser.add_argument("--expect-bitrate", type=float, default=None)
    parser.add_argument("--max-sync-kbps", type=float, default=None)
    parser.add_argument("--warmup-seconds", type=float, default=DEFAULT_WARMUP_S)
    parser.add_argument("--json", dest="json_out", default=None, help="report path")
    args = parser.parse_args(argv)

    report = run_load_test(
        args.url,
        args.listeners,
        args.seconds,
        expect_bitrate=args.expect_bitrate,
        max_sync_kbps=args.max_sync_kbps,
        warmup_s=args.warmup_seconds,
    )
    text = report.to_json()
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    for failure in report.failures:
        print(f"FAIL: {failure}", file=sys.stderr)
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
