"""Pluggable speech-synthesizer adapters for announcements.

An adapter turns (text, voice) into an MP3 file path. Three kinds exist:
an external command, an HTTP endpoint, and a deterministic stub so that
every test and demo runs without any vendor engine installed.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
import urllib.error
import urllib.request
import zlib
from pathlib import Path

from . import mp3frame

STUB_BITRATE_KBPS = 128
STUB_SAMPLE_RATE_HZ = 44100


class SynthesisError(RuntimeError):
    """The adapter failed to produce an output file."""


class StubSynthesizer:
    """Bundled offline synthesizer producing deterministic MP3 fixtures.

    The output is a valid CBR frame stream whose length and payload are a
    pure function of (text, voice); the audio content is placeholder
    silence, which is all the pipeline needs.
    """

    def __init__(self, out_dir: str | Path | None = None) -> None:
        self.out_dir = Path(out_dir) if out_dir else Path(tempfile.mkdtemp(prefix="tts_"))
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def synthesize(self, text: str, voice: str = "") -> Path:
        if not text:
            raise SynthesisError("text must be non-empty")
        seed = zlib.crc32(f"{voice}\x00{text}".encode("utf-8"))
        frames = 16 + 2 * min(len(text), 128)
        data = mp3frame.build_cbr_stream(
            STUB_BITRATE_KBPS, STUB_SAMPLE_RATE_HZ, frames, seed=seed
        )
        path = self.out_dir / f"announce_{seed:08x}.mp3"
        path.write_bytes(data)
        return path


class CommandSynthesizer:
    """Runs `<command> <text> <voice>`; stdout is the produced file path."""

    def __init__(self, command: str) -> None:
        self.argv = shlex.split(command)
        if not self.argv:
            raise ValueError("empty synthesizer command")

    def synthesize(self, text: str, voice: str = "") -> Path:
        if not text:
            raise SynthesisError("text must be non-empty")
        try:
            proc = subprocess.run(
                self.argv + [text, voice],
                capture_output=True,
                text=True,
                timeout=120,
            )
        except OSError as exc:
            raise SynthesisError(f"cannot run synthesizer: {exc}") from exc
        if proc.returncode != 0:
            raise SynthesisError(
                f"synthesizer exited {proc.returncode}: {proc.stderr.strip()}"
            )
        path = Path(proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else "")
        if not path.name or not path.exists():
            raise SynthesisError("synthesizer did not report an output file")
        return path


class HttpSynthesizer:
    """POSTs {text, voice} to an endpoint and saves the MP3 response body."""

    def __init__(self, url: str, out_dir: str | Path | None = None) -> None:
        self.url = url
        self.out_dir = Path(out_dir) if out_dir else Path(tempfile.mkdtemp(prefix="tts_"))
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def synthesize(self, text: str, voice: str = "") -> Path:
        if not text:
            raise SynthesisError("text must be non-empty")
        import json

        body = json.dumps({"text": text, "voice": voice}).encode("utf-8")
        request = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(request, timeout=120) as response:
                audio = response.read()
        except (urllib.error.URLError, OSError) as exc:
            raise SynthesisError(f"synthesizer endpoint unreachable: {exc}") from exc
        path = self.out_dir / f"announce_{zlib.crc32(audio):08x}.mp3"
        path.write_bytes(audio)
        return path


def resolve_synthesizer(spec: str, out_dir: str | Path | None = None):
    """Build an adapter from a CLI/config value.

    "stub" picks the bundled stub; an http(s) URL picks the HTTP adapter;
    anything else is treated as an external command line.
    """
    if spec == "stub" or not spec:
        return StubSynthesizer(out_dir)
    if spec.startswith("http://") or spec.startswith("https://"):
        return HttpSynthesizer(spec, out_dir)
    return CommandSynthesizer(spec)
