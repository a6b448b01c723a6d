from __future__ import annotations

import json
import time

import pytest

from wavecaster.harness import (
    IcyDemuxer,
    SwarmReport,
    main,
    run_listener,
    run_load_test,
    verify_frame_alignment,
)
from wavecaster import mp3frame

from station_fixture import running_station


class TestDemuxer:
    def test_title_extraction(self):
        demux = IcyDemuxer(8)
        payload = b"StreamTitle='Hello';"
        block = bytes([2]) + payload.ljust(32, b"\x00")
        demux.feed(b"12345678" + block + b"abcdefgh" + b"\x00")
        assert bytes(demux.audio) == b"12345678abcdefgh"
        assert demux.titles == [("Hello", 8)]
        assert demux.blocks == [(8, 33), (49, 1)]

    def test_partial_feeds(self):
        demux = IcyDemuxer(4)
        wire = b"aaaa" + b"\x00" + b"bbbb" + b"\x00"
        for i in range(len(wire)):
            demux.feed(wire[i:i + 1])
        assert bytes(demux.audio) == b"aaaabbbb"


class TestAlignment:
    def test_clean_stream_ok(self):
        audio = mp3frame.build_cbr_stream(128, 44100, 10)
        frames, aligned, ok = verify_frame_alignment(audio)
        assert (frames, aligned, ok) == (10, len(audio), True)

    def test_truncated_tail_ok(self):
        audio = mp3frame.build_cbr_stream(128, 44100, 10)
        frames, _, ok = verify_frame_alignment(audio[:-100])
        assert frames == 9
        assert ok

    def test_mid_stream_junk_not_ok(self):
        frame = mp3frame.build_frame(128, 44100)
        _, _, ok = verify_frame_alignment(frame + b"JUNKJUNK" + frame)
        assert not ok


class TestAgainstLiveStation:
    def test_single_listener_integrity(self, tmp_path):
        with running_station(tmp_path) as (station, _):
            report = run_listener(
                station.stream_url, 4.0, warmup_s=1.0
            )
        assert report.disconnect_reason == "completed"
        assert report.header["icy-name"] == "TestFM"
        assert report.alignment_ok
        assert report.frames_recovered > 50
        assert report.titles, "no titles observed"
        assert report.titles[0][0].startswith("Artist")
        assert report.mean_throughput_kbps == pytest.approx(128, rel=0.10)

    def test_zero_listeners_empty_report(self):
        report = run_load_test("http://127.0.0.1:1/", 0, 1.0)
        assert report.n == 0
        assert report.aggregate_kbps == 0
        assert report.listeners == []
        assert report.ok

    def test_connection_refused_reported(self):
        report = run_load_test("http://127.0.0.1:1/", 1, 1.0)
        assert not report.ok
        assert any("connect failed" in f for f in report.failures)

    def test_swarm_with_kill_leaves_others_intact(self, tmp_path):
        with running_station(tmp_path) as (station, _):
            report = run_load_test(
                station.stream_url,
                4,
                5.0,
                expect_bitrate=128,
                warmup_s=1.5,
                kill={0: 1.5},
            )
        by_id = {r["listener_id"]: r for r in report.listeners}
        assert by_id[0]["disconnect_reason"] == "killed"
        for idx in (1, 2, 3):
            assert by_id[idx]["disconnect_reason"] == "completed"
            assert by_id[idx]["alignment_ok"]
        assert report.ok, report.failures

    def test_json_report_round_trip(self, tmp_path):
        with running_station(tmp_path) as (station, _):
            report = run_load_test(station.stream_url, 2, 3.0, warmup_s=1.0)
        parsed = json.loads(report.to_json())
        assert parsed["n"] == 2
        assert len(parsed["listeners"]) == 2

    def test_cli_exit_codes(self, tmp_path, capsys):
        with running_station(tmp_path) as (station, _):
            out = tmp_path / "report.json"
            code = main([
                "--url", station.stream_url,
                "--listeners", "2",
                "--seconds", "3",
                "--expect-bitrate", "128",
                "--max-sync-kbps", "5",
                "--warmup-seconds", "1",
                "--json", str(out),
            ])
        assert code == 0
        assert json.loads(out.read_text())["ok"] is True
        # unreachable server: nonzero
        code = main(["--url", "http://127.0.0.1:1/", "--listeners", "1", "--seconds", "1"])
        assert code == 1

    def test_listener_is_pure_sink(self, tmp_path):
        # after the GET, the harness never sends; the server cannot have
        # received more than the request
        with running_station(tmp_path) as (station, _):
            report = run_listener(station.stream_url, 2.0, warmup_s=0.5)
        assert report.disconnect_reason == "completed"
