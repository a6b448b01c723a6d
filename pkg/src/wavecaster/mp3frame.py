"""MPEG-1 Layer III frame parsing.

The station never transcodes: the bitrate, frame length and frame timing
that drive pacing all come from the file's own framing. Only MPEG-1
Layer III (44.1/48/32 kHz) is accepted; everything else is rejected with
a distinct error so callers can tell bad files from bad offsets.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import BinaryIO, Iterator, Union

SAMPLES_PER_FRAME = 1152

# MPEG-1 Layer III bitrate table; index 0 is "free format", 15 is reserved.
BITRATES_KBPS = (
    None, 32, 40, 48, 56, 64, 80, 96, 112, 128, 160, 192, 224, 256, 320, None,
)
SAMPLE_RATES_HZ = (44100, 48000, 32000, None)
CHANNEL_MODES = ("stereo", "joint-stereo", "dual", "mono")

ByteSource = Union[bytes, bytearray, memoryview, BinaryIO, str, os.PathLike]


class FrameError(ValueError):
    """Base error for unparseable frame headers."""


class SyncError(FrameError):
    """The 11-bit frame sync marker is absent."""


class UnsupportedFormatError(FrameError):
    """Valid sync but not MPEG-1 Layer III (e.g. MPEG-2/2.5)."""


class BitrateIndexError(FrameError):
    """Free-format (0) or reserved (15) bitrate index."""


class SampleRateIndexError(FrameError):
    """Reserved sample-rate index."""


class NoFramesError(FrameError):
    """A byte source contained no parseable frame."""


@dataclass(frozen=True)
class FrameHeader:
    bitrate_kbps: int
    sample_rate_hz: int
    padding: int
    frame_len_bytes: int
    channel_mode: str
    samples_per_frame: int = SAMPLES_PER_FRAME

    @property
    def duration_s(self) -> float:
        return self.samples_per_frame / self.sample_rate_hz


@dataclass(frozen=True)
class StreamInfo:
    frame_count: int
    total_duration_s: float
    nominal_bitrate_kbps: int
    is_cbr: bool
    junk_bytes: int = 0


def parse_header(buf: bytes) -> FrameHeader:
    """Decode a 4-byte MPEG-1 Layer III frame header.

    Raises a distinct FrameError subclass for bad sync, non-MPEG-1-Layer-III
    streams, free/reserved bitrate indices and reserved sample-rate indices.
    """
    if len(buf) < 4:
        raise SyncError("header needs 4 bytes, got %d" % len(buf))
    b0, b1, b2, b3 = buf[0], buf[1], buf[2], buf[3]
    if b0 != 0xFF or (b1 & 0xE0) != 0xE0:
        raise SyncError("frame sync bits not set")
    version = (b1 >> 3) & 0x3
    layer = (b1 >> 1) & 0x3
    if version != 0b11:
        raise UnsupportedFormatError("only MPEG-1 is supported")
    if layer != 0b01:
        raise UnsupportedFormatError("only Layer III is supported")
    bitrate_index = b2 >> 4
    bitrate = BITRATES_KBPS[bitrate_index]
    if bitrate is None:
        if bitrate_index == 0:
            raise BitrateIndexError("free-format bitrate is not supported")
        raise BitrateIndexError("reserved bitrate index")
    rate_index = (b2 >> 2) & 0x3
    sample_rate = SAMPLE_RATES_HZ[rate_index]
    if sample_rate is None:
        raise SampleRateIndexError("reserved sample-rate index")
    padding = (b2 >> 1) & 0x1
    channel_mode = CHANNEL_MODES[b3 >> 6]
    frame_len = (144 * bitrate * 1000) // sample_rate + padding
    return FrameHeader(
        bitrate_kbps=bitrate,
        sample_rate_hz=sample_rate,
        padding=padding,
        frame_len_bytes=frame_len,
        channel_mode=channel_mode,
    )


def _read_all(source: ByteSource) -> bytes:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return bytes(source)
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return fh.read()
    return source.read()


def _id3v2_size(data: bytes) -> int:
    """Byte count of a leading ID3v2 block, 0 if absent."""
    if len(data) < 10 or data[:3] != b"ID3":
        return 0
    size = 0
    for b in data[6:10]:
        if b & 0x80:  # not syncsafe: treat as absent rather than mis-skip
            return 0
        size = (size << 7) | b
    total = 10 + size
    if data[5] & 0x10:  # footer flag
        total += 10
    return min(total, len(data))


def _scan(data: bytes) -> Iterator[tuple]:
    """Yield ("frame", header, raw) and ("junk", count) events over data."""
    pos = _id3v2_size(data)
    n = len(data)
    junk = 0
    while pos + 4 <= n:
        if n - pos == 128 and data[pos:pos + 3] == b"TAG":
            break  # ID3v1 trailer
        try:
            header = parse_header(data[pos:pos + 4])
        except FrameError:
            pos += 1
            junk += 1
            continue
        if pos + header.frame_len_bytes > n:
            break  # truncated final frame: counted as junk below
        if junk:
            yield ("junk", junk)
            junk = 0
        yield ("frame", header, data[pos:pos + header.frame_len_bytes])
        pos += header.frame_len_bytes
    tail = junk + (n - pos)
    if tail:
        yield ("junk", tail)


def iterate_frames(source: ByteSource) -> Iterator[tuple[FrameHeader, bytes]]:
    """Yield (header, raw frame bytes) for every frame in the source.

    A leading ID3v2 block is skipped, junk bytes are skipped by scanning
    forward to the next sync, and an ID3v1 "TAG" trailer is ignored.
    """
    for event in _scan(_read_all(source)):
        if event[0] == "frame":
            yield event[1], event[2]


def stream_info(source: ByteSource) -> StreamInfo:
    """Aggregate frame statistics for a byte source.

    The nominal bitrate is the first frame's; the stream is CBR iff every
    frame shares it. Raises NoFramesError when nothing parses.
    """
    count = 0
    duration = 0.0
    nominal = 0
    cbr = True
    junk = 0
    for event in _scan(_read_all(source)):
        if event[0] == "junk":
            junk += event[1]
            continue
        header = event[1]
        if count == 0:
            nominal = header.bitrate_kbps
        elif header.bitrate_kbps != nominal:
            cbr = False
        count += 1
        duration += header.duration_s
    if count == 0:
        raise NoFramesError("no MP3 frames found")
    return StreamInfo(
        frame_count=count,
        total_duration_s=duration,
        nominal_bitrate_kbps=nominal,
        is_cbr=cbr,
        junk_bytes=junk,
    )


def build_frame(
    bitrate_kbps: int,
    sample_rate_hz: int,
    *,
    padding: int = 0,
    channel_mode: str = "joint-stereo",
    fill: bytes | None = None,
) -> bytes:
    """Construct one frame with a valid header and an arbitrary payload.

    This builds frame *containers* for announcements stubs and test
    fixtures; it performs no audio encoding. The payload is `fill`
    repeated/truncated to the frame length (NULs by default, which
    decoders treat as silence).
    """
    bitrate_index = BITRATES_KBPS.index(bitrate_kbps)
    rate_index = SAMPLE_RATES_HZ.index(sample_rate_hz)
    mode_index = CHANNEL_MODES.index(channel_mode)
    b1 = 0xE0 | (0b11 << 3) | (0b01 << 1) | 0x1  # MPEG-1, Layer III, no CRC
    b2 = (bitrate_index << 4) | (rate_index << 2) | ((padding & 1) << 1)
    b3 = mode_index << 6
    header = bytes((0xFF, b1, b2, b3))
    frame_len = (144 * bitrate_kbps * 1000) // sample_rate_hz + (padding & 1)
    body_len = frame_len - 4
    if fill is None:
        body = bytes(body_len)
    else:
        reps = body_len // len(fill) + 1
        body = (fill * reps)[:body_len]
    return header + body


def build_cbr_stream(
    bitrate_kbps: int,
    sample_rate_hz: int,
    frame_count: int,
    *,
    seed: int = 0,
) -> bytes:
    """Concatenate frame_count CBR frames with distinct deterministic payloads.

    Payload bytes never contain 0xFF, so frame boundaries are unambiguous.
    """
    out = bytearray()
    for i in range(frame_count):
        tag = (seed * 7919 + i) & 0xFFFFFFFF
        fill = tag.to_bytes(4, "big").replace(b"\xff", b"\xfe")
        out += build_frame(bitrate_kbps, sample_rate_hz, fill=fill)
    return bytes(out)
