import json

import pytest

from habtrack.aprs import AprsReport, KIND_POSITION_PLAIN, encode_position_plain
from habtrack.ax25 import Ax25Frame, Callsign, FrameEvent
from habtrack.geo import GeoFix, pointing
from habtrack.nmea import FixQuality, OwnFix
from habtrack.tracker import (
    EVENT_PACKET_LOGGED,
    EVENT_POINTING_UPDATED,
    EVENT_SIGNAL_LOST,
    EVENT_SIGNAL_REACQUIRED,
    EVENT_STATION_UPDATED,
    Tracker,
    fold_records,
)


def position_frame(t, lat, lon, alt=1000.0, call="W3EAX", ssid=12, comment=" up"):
    report = AprsReport(
        kind=KIND_POSITION_PLAIN,
        position=GeoFix(lat, lon, alt),
        symbol=("/", "O"),
        altitude_m=alt,
        comment=comment,
    )
    frame = Ax25Frame(
        destination=Callsign("APRS"),
        source=Callsign(call, ssid),
        info=encode_position_plain(report),
    )
    return FrameEvent(frame=frame, received_at=t, raw=frame.to_bytes())


def own_fix(t, lat=38.99, lon=-76.94, alt=50.0):
    return OwnFix(
        position=GeoFix(lat, lon, alt, time=t),
        course_deg=0.0,
        speed_knots=0.0,
        fix_quality=FixQuality.GPS,
        satellites=8,
        updated_at=t,
    )


def test_first_packet_creates_station():
    tracker = Tracker()
    events = tracker.ingest_frame(position_frame(10.0, 39.0, -76.9))
    assert [e.variant for e in events] == [EVENT_STATION_UPDATED, EVENT_PACKET_LOGGED]
    assert "W3EAX-12" in tracker.stations
    assert tracker.stations["W3EAX-12"].packet_count == 1


def test_duplicate_within_window_deduplicated():
    tracker = Tracker()
    tracker.ingest_frame(position_frame(10.0, 39.0, -76.9))
    events = tracker.ingest_frame(position_frame(10.8, 39.0, -76.9))
    station = tracker.stations["W3EAX-12"]
    assert station.packet_count == 2
    assert len(station.fixes) == 1  # no synthetic or duplicate fixes
    updated = [e for e in events if e.variant == EVENT_STATION_UPDATED][0]
    assert not updated.payload["fix_appended"]


def test_duplicate_after_window_appended():
    tracker = Tracker()
    tracker.ingest_frame(position_frame(10.0, 39.0, -76.9))
    tracker.ingest_frame(position_frame(20.0, 39.0, -76.9))
    assert len(tracker.stations["W3EAX-12"].fixes) == 2


def test_fix_count_equals_accepted_positions(rng):
    tracker = Tracker()
    accepted = 0
    t = 0.0
    last = None
    for _ in range(200):
        t += float(rng.uniform(0.1, 3.0))
        # Steps far coarser than the wire quantization (0.01 arc-minute)
        # so equality on the wire matches equality here.
        lat = 39.0 + float(rng.integers(0, 3)) * 1e-2
        tracker.ingest_frame(position_frame(t, lat, -76.9, alt=500.0))
        key = (lat, t)
        if last is None or last[0] != lat or t - last[1] > 1.0:
            accepted += 1
            last = key
        elif last[0] == lat and t - last[1] <= 1.0:
            pass  # deduplicated
        else:
            accepted += 1
            last = key
    assert len(tracker.stations["W3EAX-12"].fixes) == accepted


def test_parse_failure_leaves_state_unchanged():
    tracker = Tracker()
    bad = Ax25Frame(
        destination=Callsign("APRS"),
        source=Callsign("W3EAX", 12),
        info=b"=junk position",
    )
    events = tracker.ingest_frame(FrameEvent(frame=bad, received_at=1.0, raw=b""))
    assert [e.variant for e in events] == [EVENT_PACKET_LOGGED]
    assert not events[0].payload["ok"]
    assert events[0].payload["error"]
    assert tracker.stations == {}


def test_non_ui_frame_logged_only():
    tracker = Tracker()
    frame = Ax25Frame(
        destination=Callsign("APRS"), source=Callsign("W3EAX"), control=0x2F
    )
    events = tracker.ingest_frame(FrameEvent(frame=frame, received_at=1.0, raw=b""))
    assert [e.variant for e in events] == [EVENT_PACKET_LOGGED]
    assert tracker.stations == {}


def test_own_fix_void_ignored():
    tracker = Tracker()
    void = OwnFix(position=GeoFix(39.0, -76.9, 50.0), fix_quality=FixQuality.NONE)
    assert tracker.ingest_own_fix(void, at=1.0) == []
    assert tracker.own is None


def test_own_fix_without_target_only_own_updated():
    tracker = Tracker()
    events = tracker.ingest_own_fix(own_fix(5.0), at=5.0)
    assert [e.variant for e in events] == ["own_updated"]


def test_pointing_event_matches_geo_math():
    tracker = Tracker(target="W3EAX-12")
    tracker.ingest_frame(position_frame(1.0, 39.05, -76.90, alt=6000.0))
    events = tracker.ingest_own_fix(own_fix(2.0), at=2.0)
    point = [e for e in events if e.variant == EVENT_POINTING_UPDATED][0]
    balloon = tracker.stations["W3EAX-12"].fixes[-1]
    expected = pointing(tracker.own.position, balloon)
    assert point.payload["azimuth_deg"] == pytest.approx(expected.azimuth_deg)
    assert point.payload["elevation_deg"] == pytest.approx(expected.elevation_deg)
    assert point.payload["slant_range_m"] == pytest.approx(expected.slant_range_m)


def test_watchdog_sequence_lost_reacquired_lost():
    tracker = Tracker(target="W3EAX-12", loss_threshold_s=120.0)
    variants = []

    def collect(events):
        variants.extend(e.variant for e in events)

    collect(tracker.ingest_frame(position_frame(0.0, 39.0, -76.9)))
    collect(tracker.watchdog(60.0))  # below threshold: nothing
    collect(tracker.watchdog(121.0))  # crosses: one signal_lost
    collect(tracker.watchdog(500.0))  # idempotent while lost
    collect(tracker.ingest_frame(position_frame(600.0, 39.1, -76.8)))
    collect(tracker.watchdog(900.0))  # lost again
    lost_like = [v for v in variants if v in (EVENT_SIGNAL_LOST, EVENT_SIGNAL_REACQUIRED)]
    assert lost_like == [EVENT_SIGNAL_LOST, EVENT_SIGNAL_REACQUIRED, EVENT_SIGNAL_LOST]


def test_packet_age():
    tracker = Tracker()
    tracker.ingest_frame(position_frame(100.0, 39.0, -76.9))
    assert tracker.packet_age("W3EAX-12", 100.0) == 0.0
    assert tracker.packet_age("W3EAX-12", 190.0) == 90.0
    assert tracker.packet_age("NOBODY", 190.0) is None


def test_track_tail_windows():
    tracker = Tracker()
    for t in (0.0, 100.0, 200.0, 300.0):
        tracker.ingest_frame(position_frame(t, 39.0 + t * 1e-5, -76.9))
    # zero-plus window: only the newest fix
    assert [f.time for f in tracker.track_tail("W3EAX-12", 300.0, 0.0)] == [300.0]
    # everything aged out
    assert tracker.track_tail("W3EAX-12", 10_000.0, 100.0) == []
    # mixed ages, order preserved
    times = [f.time for f in tracker.track_tail("W3EAX-12", 300.0, 150.0)]
    assert times == [200.0, 300.0]
    assert tracker.track_tail("UNKNOWN", 0.0) == []


def test_seq_strictly_increasing_and_fold_matches():
    tracker = Tracker(target="W3EAX-12")
    events = [tracker.config_event(0.0)]
    events += tracker.ingest_frame(position_frame(1.0, 39.0, -76.9))
    events += tracker.ingest_own_fix(own_fix(2.0), at=2.0)
    events += tracker.watchdog(500.0)
    events += tracker.ingest_frame(position_frame(600.0, 39.2, -76.7))
    events += tracker.set_tail_window(3600.0, 601.0)
    events += tracker.set_target(None, 602.0)
    seqs = [e.seq for e in events]
    assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)

    records = [json.loads(e.to_json()) for e in events]
    assert fold_records(records).snapshot_json() == tracker.snapshot_json()


def test_total_order_determinism(rng):
    # Two interleavings of the same time-stamped inputs, both in time
    # order, must land on identical snapshots.
    frames = [
        position_frame(float(t), 39.0 + t * 1e-4, -76.9, call="W3EAX", ssid=12)
        for t in range(0, 100, 10)
    ]
    fixes = [(own_fix(float(t) + 5.0), float(t) + 5.0) for t in range(0, 100, 10)]

    def run(order):
        tracker = Tracker(target="W3EAX-12")
        for kind, item in order:
            if kind == "frame":
                tracker.ingest_frame(item)
            else:
                tracker.ingest_own_fix(item[0], at=item[1])
        return tracker.snapshot_json()

    merged = [("frame", f) for f in frames] + [("own", x) for x in fixes]
    merged.sort(key=lambda kv: kv[1].received_at if kv[0] == "frame" else kv[1][1])
    assert run(merged) == run(list(merged))


def test_status_packet_updates_last_heard_without_fix():
    tracker = Tracker()
    frame = Ax25Frame(
        destination=Callsign("APRS"), source=Callsign("W3EAX", 12), info=b">alive"
    )
    tracker.ingest_frame(FrameEvent(frame=frame, received_at=50.0, raw=b""))
    station = tracker.stations["W3EAX-12"]
    assert station.packet_count == 1
    assert station.fixes == []
    assert station.last_heard == 50.0
