"""Command line entry points: `wavecaster serve` and `wavecaster restore`."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
import wave

import numpy as np

from . import restore as restore_mod
from .api import DEFAULT_API_PORT
from .catalog import Catalog
from .station import RadioStation, StationConfig
from .streamer import DEFAULT_METAINT, DEFAULT_RING_SECONDS, DEFAULT_STREAM_PORT

LIBRARY_ENV = "WAVECASTER_LIBRARY_DIR"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavecaster")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the station")
    serve.add_argument(
        "--library",
        default=os.environ.get(LIBRARY_ENV, "library"),
        help=f"library directory (or ${LIBRARY_ENV})",
    )
    serve.add_argument("--host", default="0.0.0.0")
    serve.add_argument("--stream-port", type=int, default=DEFAULT_STREAM_PORT)
    serve.add_argument("--api-port", type=int, default=DEFAULT_API_PORT)
    serve.add_argument("--metaint", type=int, default=DEFAULT_METAINT)
    serve.add_argument("--ring-seconds", type=float, default=DEFAULT_RING_SECONDS)
    serve.add_argument("--max-listeners", type=int, default=None)
    serve.add_argument("--station-name", default="wavecaster")
    serve.add_argument("--station-genre", default="Various")
    serve.add_argument("--tts-adapter", default="stub")
    serve.add_argument("--announce-voice", default="")
    serve.add_argument("--console-dir", default=None)

    rest = sub.add_parser("restore", help="repair a gap in a mono WAV recording")
    rest.add_argument("--in", dest="infile", required=True)
    rest.add_argument("--gap-start", type=int, required=True)
    rest.add_argument("--gap-len", type=int, required=True)
    rest.add_argument("--order", type=int, default=restore_mod.DEFAULT_ORDER)
    rest.add_argument("--out", dest="outfile", required=True)

    ingest = sub.add_parser("ingest", help="add local MP3 files to the library")
    ingest.add_argument("files", nargs="+")
    ingest.add_argument(
        "--library",
        default=os.environ.get(LIBRARY_ENV, "library"),
        help=f"library directory (or ${LIBRARY_ENV})",
    )
    ingest.add_argument("--artist", default="")
    ingest.add_argument("--album", default="")
    ingest.add_argument("--genre", default="")
    ingest.add_argument("--language", default="")
    return parser


def cmd_serve(args) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(asctime)s %(name)s %(levelname)s %(message)s"
    )
    catalog = Catalog(args.library)
    config = StationConfig(
        station_name=args.station_name,
        station_genre=args.station_genre,
        host=args.host,
        stream_port=args.stream_port,
        api_port=args.api_port,
        metaint=args.metaint,
        ring_seconds=args.ring_seconds,
        max_listeners=args.max_listeners,
        tts_adapter=args.tts_adapter,
        announce_voice=args.announce_voice,
        console_dir=args.console_dir,
    )
    station = RadioStation(catalog, config)
    station.start()
    print(f"stream: {station.stream_url}")
    print(f"api:    http://{args.host}:{station.api_server.port}/api/now-playing")
    try:
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        pass
    finally:
        station.stop()
    return 0


def read_mono_wav(path: str) -> tuple[np.ndarray, int]:
    with wave.open(path, "rb") as fh:
        if fh.getsampwidth() != 2:
            raise SystemExit("only 16-bit PCM WAV is supported")
        rate = fh.getframerate()
        channels = fh.getnchannels()
        data = np.frombuffer(fh.readframes(fh.getnframes()), dtype="<i2")
        if channels > 1:
            data = data.reshape(-1, channels)[:, 0]
    return data.astype(float) / 32768.0, rate


def write_mono_wav(path: str, samples: np.ndarray, rate: int) -> None:
    clipped = np.clip(samples, -1.0, 1.0)
    pcm = (clipped * 32767.0).astype("<i2")
    with wave.open(path, "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(rate)
        fh.writeframes(pcm.tobytes())


def cmd_restore(args) -> int:
    samples, rate = read_mono_wav(args.infile)
    repaired = restore_mod.gap_fill(samples, args.gap_start, args.gap_len, args.order)
    write_mono_wav(args.outfile, repaired, rate)
    print(
        f"restored {args.gap_len} samples at {args.gap_start} "
        f"(order {args.order}) -> {args.outfile}"
    )
    return 0


def cmd_ingest(args) -> int:
    from .catalog import InvalidTrackFileError
    from pathlib import Path

    catalog = Catalog(args.library)
    failures = 0
    for name in args.files:
        try:
            track = catalog.add_track(
                title=Path(name).stem,
                artist=args.artist,
                album=args.album,
                genre=args.genre,
                language=args.language,
                file=name,
            )
        except InvalidTrackFileError as exc:
            print(f"skipped {name}: {exc}", file=sys.stderr)
            failures += 1
            continue
        print(
            f"{track.id}  {track.title}  {track.bitrate_kbps} kbps  "
            f"{track.duration_s:.1f} s"
        )
    return 1 if failures else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        return cmd_serve(args)
    if args.command == "restore":
        return cmd_restore(args)
    if args.command == "ingest":
        return cmd_ingest(args)
    return 2


if __name__ == "__main__":
    sys.exit(main())
