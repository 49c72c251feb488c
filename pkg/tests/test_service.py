import asyncio
import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from habtrack.aprs import AprsReport, KIND_POSITION_PLAIN, encode_position_plain
from habtrack.ax25 import Ax25Frame, Callsign, FrameEvent, frame_to_linebits
from habtrack.errors import ConfigError
from habtrack.geo import GeoFix
from habtrack.kiss import kiss_encode
from habtrack.modem import ModemConfig, modulate
from habtrack.service import (
    ServiceConfig,
    ServiceCore,
    build_app,
    build_replay_app,
    feed_audio,
    kiss_server,
    load_replay,
    nmea_file_source,
    scenario_source,
)
from habtrack.sim import load_scenario
from habtrack.tracker import Tracker, read_log

DATA = Path(__file__).parent.parent / "src/habtrack/data"


def make_frame(t, lat, lon, alt=1000.0, ssid=12):
    report = AprsReport(
        kind=KIND_POSITION_PLAIN,
        position=GeoFix(lat, lon, alt),
        symbol=("/", "O"),
        altitude_m=alt,
    )
    frame = Ax25Frame(
        destination=Callsign("APRS"),
        source=Callsign("W3EAX", ssid),
        info=encode_position_plain(report),
    )
    return FrameEvent(frame=frame, received_at=t, raw=frame.to_bytes())


def test_service_config_requires_source():
    with pytest.raises(ConfigError):
        ServiceConfig().validate()
    ServiceConfig(kiss_listen_port=8001).validate()


def test_core_broadcasts_to_all_subscribers():
    async def run():
        core = ServiceCore(Tracker(), clock=lambda: 0.0)
        q1, q2 = core.subscribe(), core.subscribe()
        await core.start()
        await core.put(("frame", make_frame(1.0, 39.0, -76.9)))
        await core.drain()
        await core.stop()
        a = [q1.get_nowait() for _ in range(q1.qsize())]
        b = [q2.get_nowait() for _ in range(q2.qsize())]
        return a, b

    a, b = asyncio.run(run())
    assert [e.seq for e in a] == [e.seq for e in b]
    assert [e.variant for e in a] == [e.variant for e in b]
    assert len(a) >= 2  # config + station_updated + packet_logged


def test_kiss_tcp_loopback():
    async def run():
        core = ServiceCore(Tracker(), clock=lambda: 42.0)
        await core.start()
        server = await kiss_server(core, 0, host="127.0.0.1")
        port = server.sockets[0].getsockname()[1]
        frame = make_frame(0.0, 39.01, -76.9).frame
        reader, writer = await asyncio.open_connection("127.0.0.1", port)
        writer.write(kiss_encode(frame.to_bytes()))
        await writer.drain()
        writer.close()
        await writer.wait_closed()
        await asyncio.sleep(0.05)
        await core.drain()
        snapshot = core.tracker.snapshot()
        server.close()
        await server.wait_closed()
        await core.stop()
        return snapshot, frame

    snapshot, frame = asyncio.run(run())
    assert str(frame.source) in snapshot["stations"]
    station = snapshot["stations"][str(frame.source)]
    assert station["packet_count"] == 1
    assert station["fixes"][0]["time"] == 42.0


def test_audio_feed_produces_frames():
    async def run():
        core = ServiceCore(Tracker(), clock=lambda: 0.0)
        await core.start()
        frame = make_frame(0.0, 38.9, -76.5).frame
        audio = modulate(frame_to_linebits(frame, preamble_flags=8), ModemConfig())
        count = await feed_audio(core, audio)
        await core.drain()
        snapshot = core.tracker.snapshot()
        await core.stop()
        return count, snapshot

    count, snapshot = asyncio.run(run())
    assert count == 1
    assert "W3EAX-12" in snapshot["stations"]


def test_nmea_file_source(tmp_path):
    from habtrack.sim import WalkPath

    walk = WalkPath(center=GeoFix(39.0095, -76.9268, 48.0), duration_s=10.0)
    nmea = tmp_path / "walk.nmea"
    nmea.write_text("\n".join(line for _, line in walk.nmea_lines()) + "\n")

    async def run():
        core = ServiceCore(Tracker(), clock=lambda: 0.0)
        q = core.subscribe()
        await core.start()
        await nmea_file_source(core, nmea)
        await core.drain()
        await core.stop()
        return [q.get_nowait() for _ in range(q.qsize())]

    events = asyncio.run(run())
    own = [e for e in events if e.variant == "own_updated"]
    assert len(own) == 11  # one per GGA epoch
    # First fix: one default radius (150 m) north of the walk center.
    assert own[0].payload["fix"]["lat"] == pytest.approx(
        39.0095 + 150 / 111320.0, abs=1e-4
    )


def test_http_state_and_controls():
    core = ServiceCore(Tracker(), clock=lambda: 99.0)
    app = build_app(core)
    with TestClient(app) as client:  # lifespan starts the worker
        client.portal.call(core.queue.put_nowait, ("frame", make_frame(5.0, 39.0, -76.9)))
        client.portal.call(lambda: None)  # let the worker run one turn

        response = client.get("/state")
        assert response.status_code == 200
        assert response.content == core.tracker.snapshot_json().encode()

        response = client.post("/target", json={"callsign": "W3EAX-12"})
        assert response.status_code == 200
        assert core.tracker.target == "W3EAX-12"

        response = client.post("/config/tail_window", json={"seconds": 3600})
        assert response.status_code == 200
        assert core.tracker.tail_window_s == 3600.0

        response = client.post("/config/tail_window", json={"seconds": -5})
        assert response.status_code == 422

        response = client.get("/stations/W3EAX-12/tail?window=100&now=200")
        assert response.status_code == 200
        body = response.json()
        assert body["callsign"] == "W3EAX-12"

        response = client.get("/tiles-available")
        assert response.json() == {"tiles": False}


def test_websocket_event_stream_two_clients():
    core = ServiceCore(Tracker(), clock=lambda: 0.0)
    app = build_app(core)
    with TestClient(app) as client:
        with client.websocket_connect("/events") as ws1, client.websocket_connect(
            "/events"
        ) as ws2:
            client.portal.call(
                core.queue.put_nowait, ("frame", make_frame(1.0, 39.0, -76.9))
            )
            first1 = json.loads(ws1.receive_text())
            first2 = json.loads(ws2.receive_text())
            second1 = json.loads(ws1.receive_text())
            second2 = json.loads(ws2.receive_text())
    assert first1 == first2
    assert second1 == second2
    assert first1["seq"] < second1["seq"]


def test_replay_core_folds_and_rebroadcasts(tmp_path):
    log_path = tmp_path / "events.ndjson"

    async def record():
        tracker = Tracker(target="W3EAX-12")
        core = ServiceCore(tracker, log_path=str(log_path), clock=lambda: 0.0)
        await core.start()
        scenario = load_scenario(DATA / "ns77.json")
        await scenario_source(core, scenario, speed=0.0)
        await core.stop()
        return tracker.snapshot_json()

    live_snapshot = asyncio.run(record())

    replay = load_replay(log_path)

    async def run_replay():
        q = replay.subscribe()
        await replay.run(speed=0.0)
        return q.qsize()

    n = asyncio.run(run_replay())
    assert n == len(read_log(log_path))
    assert replay.snapshot_json() == live_snapshot

    app = build_replay_app(replay)
    with TestClient(app) as client:
        assert client.get("/state").content == live_snapshot.encode()
        assert client.post("/target").status_code == 409
