"""Authoritative tracking state and its replayable event stream.

A single writer feeds frames, own fixes, and clock ticks into
:class:`Tracker`; every state change comes back out as an event. Events
serialize to NDJSON (one per line) and folding a recorded log through
:class:`EventFold` rebuilds the exact state snapshot, byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .aprs import AprsReport, parse_info
from .ax25 import FrameEvent
from .errors import AprsParseError, ValidationError
from .geo import GeoFix, pointing
from .nmea import FixQuality, OwnFix

EVENT_STATION_UPDATED = "station_updated"
EVENT_OWN_UPDATED = "own_updated"
EVENT_POINTING_UPDATED = "pointing_updated"
EVENT_SIGNAL_LOST = "signal_lost"
EVENT_SIGNAL_REACQUIRED = "signal_reacquired"
EVENT_PACKET_LOGGED = "packet_logged"
EVENT_CONFIG = "config"  # log bookkeeping so replay can seed settings

DEFAULT_TAIL_WINDOW_S = 7200.0
DEFAULT_LOSS_THRESHOLD_S = 120.0
DEDUP_WINDOW_S = 1.0


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, no whitespace, no NaN."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def fix_to_dict(fix: GeoFix) -> dict:
    return {"alt_m": fix.alt_m, "lat": fix.lat, "lon": fix.lon, "time": fix.time}


@dataclass(frozen=True)
class TrackerEvent:
    variant: str
    payload: dict
    seq: int
    time: float

    def to_record(self) -> dict:
        return {
            "payload": self.payload,
            "seq": self.seq,
            "time": self.time,
            "variant": self.variant,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_record())


@dataclass
class StationTrack:
    """Per-station history: time-ordered fixes plus last-packet metadata."""

    callsign: str
    fixes: list = field(default_factory=list)
    last_report: AprsReport | None = None
    last_heard: float = 0.0
    packet_count: int = 0


class Tracker:
    """Single-writer tracking state.

    All mutation goes through the ingest/watchdog/set methods, each of
    which returns the events it produced; readers use :meth:`snapshot`.
    """

    def __init__(
        self,
        tail_window_s: float = DEFAULT_TAIL_WINDOW_S,
        loss_threshold_s: float = DEFAULT_LOSS_THRESHOLD_S,
        target: str | None = None,
    ):
        if tail_window_s <= 0:
            raise ValidationError("tail window must be positive")
        self.tail_window_s = float(tail_window_s)
        self.loss_threshold_s = float(loss_threshold_s)
        self.target = target
        self.stations: dict[str, StationTrack] = {}
        self.own: OwnFix | None = None
        self.target_lost = False
        self._seq = 0
        self._last_pointing: dict | None = None
        self._last_own_payload: dict | None = None

    # event plumbing ----------------------------------------------------

    def _emit(self, variant: str, payload: dict, at: float) -> TrackerEvent:
        self._seq += 1
        return TrackerEvent(variant=variant, payload=payload, seq=self._seq, time=at)

    def config_event(self, at: float) -> TrackerEvent:
        """Current settings as a log record; replay seeds from these."""
        return self._emit(
            EVENT_CONFIG,
            {
                "loss_threshold_s": self.loss_threshold_s,
                "tail_window_s": self.tail_window_s,
                "target": self.target,
            },
            at,
        )

    # ingestion ---------------------------------------------------------

    def ingest_frame(self, ev: FrameEvent) -> list[TrackerEvent]:
        """Fold one FCS-valid frame into the state."""
        if not ev.fcs_ok:
            return []
        now = ev.received_at
        tnc2 = ev.frame.to_tnc2()
        source = str(ev.frame.source)

        if not ev.frame.is_ui:
            return [
                self._emit(
                    EVENT_PACKET_LOGGED,
                    {
                        "error": "non-UI frame ignored",
                        "kind": None,
                        "ok": False,
                        "source": source,
                        "tnc2": tnc2,
                    },
                    now,
                )
            ]

        try:
            report = parse_info(ev.frame.info, ev.frame.destination)
        except AprsParseError as exc:
            return [
                self._emit(
                    EVENT_PACKET_LOGGED,
                    {
                        "error": str(exc),
                        "kind": None,
                        "ok": False,
                        "source": source,
                        "tnc2": tnc2,
                    },
                    now,
                )
            ]

        track = self.stations.get(source)
        if track is None:
            track = StationTrack(callsign=source)
            self.stations[source] = track

        previous_heard = track.last_heard if track.packet_count else None

        appended = None
        if report.position is not None:
            fix = GeoFix(
                report.position.lat,
                report.position.lon,
                report.position.alt_m,
                time=now,
            )
            if not self._is_duplicate(track, fix):
                track.fixes.append(fix)
                appended = fix

        track.last_report = report
        track.last_heard = now
        track.packet_count += 1

        events = [
            self._emit(
                EVENT_STATION_UPDATED,
                {
                    "altitude_m": report.altitude_m,
                    "callsign": source,
                    "comment": report.comment,
                    "course_deg": report.course_deg,
                    "fix": fix_to_dict(appended) if appended else None,
                    "fix_appended": appended is not None,
                    "kind": report.kind,
                    "last_heard": now,
                    "packet_count": track.packet_count,
                    "speed_knots": report.speed_knots,
                    "symbol": list(report.symbol) if report.symbol else None,
                },
                now,
            )
        ]

        if source == self.target and self.target_lost:
            self.target_lost = False
            gap = now - previous_heard if previous_heard is not None else 0.0
            events.append(
                self._emit(
                    EVENT_SIGNAL_REACQUIRED,
                    {
                        "callsign": source,
                        "fix": fix_to_dict(appended) if appended else None,
                        "gap_s": gap,
                    },
                    now,
                )
            )

        if source == self.target:
            point = self._pointing_event(now)
            if point:
                events.append(point)

        events.append(
            self._emit(
                EVENT_PACKET_LOGGED,
                {
                    "error": None,
                    "kind": report.kind,
                    "ok": True,
                    "source": source,
                    "tnc2": tnc2,
                },
                now,
            )
        )
        return events

    @staticmethod
    def _is_duplicate(track: StationTrack, fix: GeoFix) -> bool:
        if not track.fixes:
            return False
        last = track.fixes[-1]
        return (
            last.lat == fix.lat
            and last.lon == fix.lon
            and last.alt_m == fix.alt_m
            and fix.time - last.time <= DEDUP_WINDOW_S
        )

    def ingest_own_fix(self, fix: OwnFix, at: float | None = None) -> list[TrackerEvent]:
        """Fold an own-GPS fix; void fixes are ignored entirely."""
        if fix.fix_quality is FixQuality.NONE or fix.position is None:
            return []
        now = at if at is not None else (fix.updated_at or 0.0)
        self.own = fix
        self._last_own_payload = {
            "course_deg": fix.course_deg,
            "fix": fix_to_dict(fix.position),
            "quality": fix.fix_quality.value,
            "satellites": fix.satellites,
            "speed_knots": fix.speed_knots,
        }
        events = [self._emit(EVENT_OWN_UPDATED, self._last_own_payload, now)]
        point = self._pointing_event(now)
        if point:
            events.append(point)
        return events

    def _pointing_event(self, now: float) -> TrackerEvent | None:
        if self.own is None or self.own.position is None or not self.target:
            return None
        track = self.stations.get(self.target)
        if track is None or not track.fixes:
            return None
        try:
            solution = pointing(self.own.position, track.fixes[-1])
        except Exception:
            return None
        self._last_pointing = {
            "azimuth_deg": solution.azimuth_deg,
            "azimuth_undefined": solution.azimuth_undefined,
            "elevation_deg": solution.elevation_deg,
            "slant_range_m": solution.slant_range_m,
            "target": self.target,
        }
        return self._emit(EVENT_POINTING_UPDATED, self._last_pointing, now)

    # time-driven -------------------------------------------------------

    def watchdog(self, now: float, loss_threshold_s: float | None = None) -> list[TrackerEvent]:
        """Raise signal_lost once when the target goes quiet too long."""
        threshold = (
            loss_threshold_s if loss_threshold_s is not None else self.loss_threshold_s
        )
        if not self.target or self.target_lost:
            return []
        track = self.stations.get(self.target)
        if track is None or track.packet_count == 0:
            return []
        age = now - track.last_heard
        if age <= threshold:
            return []
        self.target_lost = True
        return [
            self._emit(
                EVENT_SIGNAL_LOST,
                {"age_s": age, "callsign": self.target, "last_heard": track.last_heard},
                now,
            )
        ]

    # queries -------------------------------------------------------------

    def track_tail(
        self, callsign: str, now: float, window_s: float | None = None
    ) -> list[GeoFix]:
        """Fixes within the tail window, oldest first."""
        track = self.stations.get(callsign)
        if track is None:
            return []
        window = window_s if window_s is not None else self.tail_window_s
        cutoff = now - window
        return [f for f in track.fixes if f.time >= cutoff]

    def packet_age(self, callsign: str, now: float) -> float | None:
        track = self.stations.get(callsign)
        if track is None or track.packet_count == 0:
            return None
        return now - track.last_heard

    # control -------------------------------------------------------------

    def set_target(self, callsign: str | None, at: float) -> list[TrackerEvent]:
        if callsign != self.target:
            self.target = callsign
            self.target_lost = False
            self._last_pointing = None
        return [self.config_event(at)]

    def set_tail_window(self, seconds: float, at: float) -> list[TrackerEvent]:
        if seconds <= 0:
            raise ValidationError("tail window must be positive")
        self.tail_window_s = float(seconds)
        return [self.config_event(at)]

    # snapshots -----------------------------------------------------------

    def snapshot(self) -> dict:
        stations = {}
        for call, track in self.stations.items():
            report = track.last_report
            stations[call] = {
                "altitude_m": report.altitude_m if report else None,
                "callsign": call,
                "comment": report.comment if report else "",
                "course_deg": report.course_deg if report else None,
                "fixes": [fix_to_dict(f) for f in track.fixes],
                "kind": report.kind if report else None,
                "last_heard": track.last_heard,
                "packet_count": track.packet_count,
                "speed_knots": report.speed_knots if report else None,
                "symbol": list(report.symbol) if report and report.symbol else None,
            }
        return {
            "config": {
                "loss_threshold_s": self.loss_threshold_s,
                "tail_window_s": self.tail_window_s,
                "target": self.target,
            },
            "own": self._last_own_payload,
            "pointing": self._last_pointing,
            "seq": self._seq,
            "stations": stations,
            "target_lost": self.target_lost,
        }

    def snapshot_json(self) -> str:
        return canonical_json(self.snapshot())


class EventFold:
    """Rebuild a state snapshot from a recorded event stream.

    Folding every record of a log produces the same snapshot dict (and
    therefore the same canonical JSON bytes) as the live tracker had
    after emitting those events.
    """

    def __init__(self):
        self.config = {
            "loss_threshold_s": DEFAULT_LOSS_THRESHOLD_S,
            "tail_window_s": DEFAULT_TAIL_WINDOW_S,
            "target": None,
        }
        self.stations: dict[str, dict] = {}
        self.own = None
        self.pointing = None
        self.target_lost = False
        self.seq = 0

    def apply(self, record: dict) -> None:
        variant = record["variant"]
        payload = record.get("payload", {})
        self.seq = record["seq"]
        if variant == EVENT_CONFIG:
            if payload.get("target") != self.config.get("target"):
                self.target_lost = False
                self.pointing = None
            self.config = {
                "loss_threshold_s": payload.get("loss_threshold_s"),
                "tail_window_s": payload.get("tail_window_s"),
                "target": payload.get("target"),
            }
        elif variant == EVENT_STATION_UPDATED:
            call = payload["callsign"]
            entry = self.stations.get(call)
            if entry is None:
                entry = {
                    "altitude_m": None,
                    "callsign": call,
                    "comment": "",
                    "course_deg": None,
                    "fixes": [],
                    "kind": None,
                    "last_heard": 0.0,
                    "packet_count": 0,
                    "speed_knots": None,
                    "symbol": None,
                }
                self.stations[call] = entry
            entry["altitude_m"] = payload["altitude_m"]
            entry["comment"] = payload["comment"]
            entry["course_deg"] = payload["course_deg"]
            entry["kind"] = payload["kind"]
            entry["last_heard"] = payload["last_heard"]
            entry["packet_count"] = payload["packet_count"]
            entry["speed_knots"] = payload["speed_knots"]
            entry["symbol"] = payload["symbol"]
            if payload["fix_appended"]:
                entry["fixes"].append(payload["fix"])
        elif variant == EVENT_OWN_UPDATED:
            self.own = payload
        elif variant == EVENT_POINTING_UPDATED:
            self.pointing = payload
        elif variant == EVENT_SIGNAL_LOST:
            self.target_lost = True
        elif variant == EVENT_SIGNAL_REACQUIRED:
            self.target_lost = False
        # packet_logged only advances seq

    def snapshot(self) -> dict:
        return {
            "config": dict(self.config),
            "own": self.own,
            "pointing": self.pointing,
            "seq": self.seq,
            "stations": self.stations,
            "target_lost": self.target_lost,
        }

    def snapshot_json(self) -> str:
        return canonical_json(self.snapshot())


def fold_records(records) -> EventFold:
    fold = EventFold()
    for record in records:
        fold.apply(record)
    return fold


class EventLog:
    """Append-only NDJSON event log (line-buffered: a crash mid-flight
    loses at most the event being written)."""

    def __init__(self, path):
        self._fh = open(path, "a", encoding="utf-8", buffering=1)

    def append(self, event: TrackerEvent) -> None:
        self._fh.write(event.to_json())
        self._fh.write("\n")

    def flush(self) -> None:
        self._fh.flush()

    def close(self) -> None:
        self._fh.flush()
        self._fh.close()


def read_log(path) -> list[dict]:
    """Load every NDJSON record of a log file."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
