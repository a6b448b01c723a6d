from __future__ import annotations

import socket
import threading
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavecaster import mp3frame
from wavecaster.harness import IcyDemuxer, parse_icy_headers
from wavecaster.streamer import (
    BandwidthModel,
    BroadcastRing,
    HandshakeError,
    IcyStreamServer,
    ListenerSession,
    PacedPublisher,
    build_icy_response,
    capacity,
    encode_metadata_block,
    estimate_bandwidth,
    pace_schedule,
    parse_listener_request,
    wrap_with_metadata,
)

GET_WITH_META = "GET / HTTP/1.0\r\nIcy-MetaData: 1\r\nHost: x\r\n\r\n"
GET_PLAIN = "GET / HTTP/1.0\r\nHost: x\r\n\r\n"


class FakeConn:
    def __init__(self):
        self.sent = bytearray()


def make_session(wants=True, metaint=64):
    return ListenerSession(FakeConn(), wants_metadata=wants, metaint=metaint)


class TestHandshake:
    def test_response_with_metadata(self):
        response = build_icy_response("MyRadio", "Rock", 128, 8192, GET_WITH_META)
        text = response.decode()
        assert text.startswith("ICY 200 OK\r\n")
        assert "icy-name: MyRadio\r\n" in text
        assert "icy-genre: Rock\r\n" in text
        assert "icy-br: 128\r\n" in text
        assert "icy-pub: 0\r\n" in text
        assert "icy-metaint: 8192\r\n" in text
        assert text.endswith("\r\n\r\n")

    def test_response_without_metadata_header(self):
        response = build_icy_response("MyRadio", "Rock", 128, 8192, GET_PLAIN)
        assert b"icy-metaint" not in response

    def test_post_rejected_405(self):
        with pytest.raises(HandshakeError) as err:
            parse_listener_request("POST / HTTP/1.0\r\n\r\n")
        assert err.value.response.startswith(b"HTTP/1.0 405")

    def test_malformed_no_http_token_closes_silently(self):
        with pytest.raises(HandshakeError) as err:
            parse_listener_request("hello there\r\n\r\n")
        assert err.value.response is None

    def test_metadata_flag_case_insensitive(self):
        assert parse_listener_request("GET / HTTP/1.0\r\nicy-metadata:1\r\n\r\n")
        assert not parse_listener_request(GET_PLAIN)


class TestMetadataBlocks:
    def test_piosenka_block_arithmetic(self):
        block = encode_metadata_block("Piosenka")
        payload = b"StreamTitle='Piosenka';"
        assert block[0] == 2  # ceil(len(payload)/16) with len 23
        assert len(block) == 33
        assert block[1:1 + len(payload)] == payload
        assert block[1 + len(payload):] == b"\x00" * (33 - 1 - len(payload))

    def test_single_quotes_dropped(self):
        block = encode_metadata_block("Don't Stop")
        assert b"StreamTitle='Dont Stop';" in block

    def test_unchanged_title_single_zero_byte(self):
        session = make_session(metaint=10)
        first = wrap_with_metadata(b"a" * 10, session, "Song")
        assert first[10] == len(b"StreamTitle='Song';") // 16 + 1
        second = wrap_with_metadata(b"b" * 10, session, "Song")
        assert second == b"b" * 10 + b"\x00"

    def test_no_metadata_session_passthrough(self):
        session = make_session(wants=False)
        audio = b"x" * 100
        assert wrap_with_metadata(audio, session, "T") == audio

    def test_counter_carries_across_calls(self):
        session = make_session(metaint=64)
        out = bytearray()
        for _ in range(8):
            out += wrap_with_metadata(b"q" * 24, session, "T")
        demux = IcyDemuxer(64)
        demux.feed(bytes(out))
        assert bytes(demux.audio) == b"q" * (24 * 8)
        # blocks appear exactly every 64 audio bytes
        assert len(demux.blocks) == 3

    @given(
        chunks=st.lists(st.integers(1, 700), min_size=1, max_size=30),
        metaint=st.sampled_from([16, 64, 256, 8192]),
    )
    @settings(max_examples=60, deadline=None)
    def test_strip_reproduces_source_exactly(self, chunks, metaint):
        session = make_session(metaint=metaint)
        source = mp3frame.build_cbr_stream(64, 44100, 6, seed=1)
        wire = bytearray()
        pos = 0
        titles = ["One", "One", "Two"]
        for i, size in enumerate(chunks):
            chunk = source[pos:pos + size]
            pos += size
            wire += wrap_with_metadata(chunk, session, titles[i % 3])
            if pos >= len(source):
                break
        demux = IcyDemuxer(metaint)
        demux.feed(bytes(wire))
        assert bytes(demux.audio) == source[:pos]

    def test_metadata_offsets_cadence(self):
        session = make_session(metaint=100)
        source = bytes(1000)
        wire = wrap_with_metadata(source, session, "Title")
        demux = IcyDemuxer(100)
        demux.feed(wire)
        expected = 100
        for offset, size in demux.blocks:
            assert offset == expected
            expected += size + 100

    def test_long_title_truncated_to_block_limit(self):
        block = encode_metadata_block("x" * 9000)
        assert block[0] <= 255
        assert len(block) == 1 + block[0] * 16


class TestPacing:
    def test_deadlines_accumulate_durations(self):
        frames = [(b"a", 0.026122), (b"b", 0.026122), (b"c", 0.026122)]
        schedule = pace_schedule(frames, t0=10.0)
        deadlines = [d for _, d in schedule]
        assert deadlines == pytest.approx([10.0, 10.026122, 10.052244])

    def test_last_deadline_of_thirty_second_file(self):
        duration = 1152 / 44100
        frames = [(b"", duration)] * 1148
        schedule = pace_schedule(frames)
        assert schedule[-1][1] == pytest.approx(1147 * duration)
        assert schedule[-1][1] + duration == pytest.approx(30.0, abs=0.05)

    def test_empty_schedule(self):
        assert pace_schedule([]) == []

    def test_publisher_respects_deadlines(self):
        ring = BroadcastRing(5.0)
        publisher = PacedPublisher(ring)
        frames = [(bytes([i]), 0.005) for i in range(40)]
        start = time.monotonic()
        publisher.play(frames, "t")
        elapsed = time.monotonic() - start
        assert elapsed >= 0.195  # 39 gaps of 5 ms must have been awaited
        assert publisher.max_lateness_s < 0.05


class TestBandwidthModel:
    def test_paper_values(self):
        assert estimate_bandwidth(10, 128, 1) == 1290
        assert estimate_bandwidth(0, 128, 1) == 0
        assert estimate_bandwidth(2, 192, 0) == 384

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            estimate_bandwidth(-1, 128, 1)

    def test_capacity_paper_values(self):
        assert capacity(512, 192, 0) == 2
        assert capacity(512, 96, 0) == 5
        assert capacity(100, 128, 0) == 0

    def test_capacity_requires_positive_rate(self):
        with pytest.raises(ValueError):
            capacity(512, 0, 0)

    def test_model_type_total(self):
        model = BandwidthModel(n=10, stream_kbps=128, sync_kbps=1)
        assert model.total_kbps == 1290


class TestBroadcastRing:
    def test_capacity_trims_by_seconds(self):
        ring = BroadcastRing(1.0)
        for i in range(50):
            ring.publish(bytes([i]), 0.1, "t")
        packets = ring.snapshot()
        assert sum(p.duration_s for p in packets) <= 1.0 + 1e-9
        assert packets[-1].seq == 49

    def test_seq_strictly_increasing(self):
        ring = BroadcastRing(10)
        seqs = [ring.publish(b"x", 0.1, "t").seq for _ in range(10)]
        assert seqs == list(range(10))

    def test_attach_sees_burst_then_each_packet_once(self):
        ring = BroadcastRing(10)
        for i in range(5):
            ring.publish(bytes([i]), 0.1, "t")
        burst, sub = ring.attach()
        assert [p.seq for p in burst] == [0, 1, 2, 3, 4]
        for i in range(5, 8):
            ring.publish(bytes([i]), 0.1, "t")
        received = [sub.get(timeout=1).seq for _ in range(3)]
        assert received == [5, 6, 7]

    def test_slow_subscriber_marked_dropped(self):
        ring = BroadcastRing(0.5)
        burst, sub = ring.attach()
        for i in range(2000):
            ring.publish(b"x", 0.01, "t")
        assert sub.dropped.is_set()

    def test_publish_never_blocks_on_slow_subscriber(self):
        ring = BroadcastRing(0.5)
        ring.attach()  # never drained
        start = time.monotonic()
        for _ in range(3000):
            ring.publish(b"x", 0.01, "t")
        assert time.monotonic() - start < 2.0


def recv_until(conn, marker, limit=65536):
    data = bytearray()
    while marker not in data and len(data) < limit:
        chunk = conn.recv(4096)
        if not chunk:
            break
        data += chunk
    return bytes(data)


@pytest.fixture
def live_server():
    ring = BroadcastRing(5.0)
    server = IcyStreamServer(
        ring,
        station_name="TestFM",
        genre="Rock",
        bitrate_kbps=128,
        host="127.0.0.1",
        port=0,
        metaint=256,
    )
    server.start()
    yield server, ring
    server.stop()


class TestLiveServer:
    def _connect(self, server, request):
        conn = socket.create_connection(("127.0.0.1", server.port), timeout=5)
        conn.sendall(request.encode())
        return conn

    def test_handshake_and_burst(self, live_server):
        server, ring = live_server
        payload = mp3frame.build_frame(128, 44100, fill=b"\x11")
        for _ in range(4):
            ring.publish(payload, 0.026, "Opener")
        conn = self._connect(server, GET_WITH_META)
        blob = recv_until(conn, b"\r\n\r\n")
        head, _, rest = blob.partition(b"\r\n\r\n")
        assert head.startswith(b"ICY 200 OK")
        headers = parse_icy_headers(head)
        assert headers["icy-name"] == "TestFM"
        assert headers["icy-metaint"] == "256"
        deadline = time.monotonic() + 5
        body = bytearray(rest)
        while len(body) < 4 * len(payload) and time.monotonic() < deadline:
            body += conn.recv(4096)
        demux = IcyDemuxer(256)
        demux.feed(bytes(body))
        assert bytes(demux.audio)[: 4 * len(payload)] == payload * 4
        assert demux.titles and demux.titles[0][0] == "Opener"
        conn.close()

    def test_post_gets_405(self, live_server):
        server, _ = live_server
        conn = self._connect(server, "POST / HTTP/1.0\r\n\r\n")
        assert recv_until(conn, b"\r\n").startswith(b"HTTP/1.0 405")
        conn.close()

    def test_listener_without_metaint_gets_pure_audio(self, live_server):
        server, ring = live_server
        payload = mp3frame.build_frame(64, 44100, fill=b"\x22")
        conn = self._connect(server, GET_PLAIN)
        head = recv_until(conn, b"\r\n\r\n")
        assert b"icy-metaint" not in head
        for _ in range(3):
            ring.publish(payload, 0.026, "NoMeta")
        body = bytearray()
        deadline = time.monotonic() + 5
        while len(body) < 3 * len(payload) and time.monotonic() < deadline:
            body += conn.recv(4096)
        assert bytes(body) == payload * 3
        conn.close()

    def test_dead_listener_does_not_disturb_others(self, live_server):
        server, ring = live_server
        victim = self._connect(server, GET_PLAIN)
        recv_until(victim, b"\r\n\r\n")
        survivor = self._connect(server, GET_PLAIN)
        recv_until(survivor, b"\r\n\r\n")
        victim.close()
        payload = mp3frame.build_frame(64, 44100, fill=b"\x33")
        collected = bytearray()

        def pump():
            for _ in range(6):
                ring.publish(payload, 0.02, "t")
                time.sleep(0.01)

        thread = threading.Thread(target=pump)
        thread.start()
        deadline = time.monotonic() + 5
        while len(collected) < 6 * len(payload) and time.monotonic() < deadline:
            collected += survivor.recv(4096)
        thread.join()
        assert bytes(collected) == payload * 6
        survivor.close()

    def test_burst_on_connect_sends_ring_contents_immediately(self, live_server):
        server, ring = live_server
        # ~2 s of 128 kbps audio sitting in the ring before the join
        frame = mp3frame.build_frame(128, 44100, fill=b"\x44")
        per_frame = 1152 / 44100
        count = int(2.0 / per_frame)
        for _ in range(count):
            ring.publish(frame, per_frame, "Burst")
        conn = self._connect(server, GET_PLAIN)
        blob = recv_until(conn, b"\r\n\r\n")
        _, _, body = blob.partition(b"\r\n\r\n")
        received = bytearray(body)
        deadline = time.monotonic() + 2.0
        expected = count * len(frame)
        while len(received) < expected and time.monotonic() < deadline:
            try:
                chunk = conn.recv(65536)
            except OSError:
                break
            if not chunk:
                break
            received += chunk
        elapsed = 2.0 - (deadline - time.monotonic())
        conn.close()
        # the whole backlog arrives as a burst, far faster than real time
        assert len(received) == expected
        assert elapsed < 1.0
        assert bytes(received) == frame * count

    def test_staggered_listeners_each_get_contiguous_window(self, live_server):
        server, ring = live_server
        frames = [
            mp3frame.build_frame(64, 44100, fill=bytes([17, i]))
            for i in range(1, 120)
        ]
        produced = bytearray()
        captures: list[bytearray] = []
        conns = []

        def pump():
            for frame in frames:
                ring.publish(frame, 0.004, "t")
                produced.extend(frame)
                time.sleep(0.004)

        thread = threading.Thread(target=pump)
        thread.start()
        for _ in range(3):
            time.sleep(0.08)
            conn = self._connect(server, GET_PLAIN)
            recv_until(conn, b"\r\n\r\n")
            conn.settimeout(0.4)
            conns.append(conn)
            captures.append(bytearray())
        end = time.monotonic() + 1.2
        while time.monotonic() < end:
            for conn, capture in zip(conns, captures):
                try:
                    capture += conn.recv(65536)
                except (socket.timeout, OSError):
                    pass
        thread.join()
        for conn in conns:
            conn.close()
        whole = bytes(produced)
        for capture in captures:
            data = bytes(capture)
            assert data, "listener received nothing"
            start = whole.find(data[:208])
            assert start >= 0, "capture start not in producer stream"
            assert whole[start:start + len(data)] == data

    def test_max_listeners_turns_extras_away(self):
        ring = BroadcastRing(5.0)
        server = IcyStreamServer(
            ring, host="127.0.0.1", port=0, max_listeners=1
        )
        server.start()
        try:
            first = socket.create_connection(("127.0.0.1", server.port), timeout=5)
            first.sendall(GET_PLAIN.encode())
            recv_until(first, b"\r\n\r\n")
            time.sleep(0.1)
            second = socket.create_connection(("127.0.0.1", server.port), timeout=5)
            second.sendall(GET_PLAIN.encode())
            reply = recv_until(second, b"\r\n")
            assert reply.startswith(b"HTTP/1.0 503")
            first.close()
            second.close()
        finally:
            server.stop()
