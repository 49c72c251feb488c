"""Deterministic balloon-flight and RF-channel simulator.

Produces APRS beacons for a piecewise-kinematic flight (linear ascent,
instantaneous burst, density-scaled parachute descent, per-band wind
advection) and drops the ones a desk receiver would never hear. The
output can be ingested directly, rendered to AFSK audio, played over
KISS TCP, or dumped as an NDJSON frame timeline.

Scenario JSON schema (all fields except name optional, defaults shown
in the dataclasses):

    {
      "name": "...",
      "seed": 0,
      "start_time": 0.0,
      "duration_s": null,
      "flight": {
        "launch": {"lat": .., "lon": .., "alt_m": ..},
        "ascent_rate_mps": 5.0,
        "burst_alt_m": 27000.0,
        "descent_rate_sl_mps": 7.0,
        "wind": [{"alt_lo_m":..,"alt_hi_m":..,"bearing_deg":..,"speed_mps":..}]
      },
      "transmitters": [{"callsign": "...", "mode": "plain"|"mice",
                        "period_s": 60, "phase_s": 0, "comment": ""}],
      "channel": {"max_range_m": 9000, "snr_at_edge_db": 10,
                  "model": "hard"|"probabilistic"},
      "receiver": {"lat": .., "lon": .., "alt_m": ..}
        or {"path": [{"time": .., "lat": .., "lon": .., "alt_m": ..}, ...]},
      "own_path": {"center": {...}, "radius_m": 150, "speed_mps": 1.4,
                   "duration_s": 600, "period_s": 1}
    }

Wind bearing is the direction of motion (where the air carries the
balloon), in degrees clockwise from true north.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .aprs import AprsReport, KIND_POSITION_PLAIN, encode_mice, encode_position_plain
from .audio import AudioBlock
from .ax25 import Ax25Frame, Callsign, frame_to_linebits
from .errors import GeometryError, ValidationError
from .geo import GeoFix, pointing
from .modem import ModemConfig, modulate
from .nmea import format_gga, format_rmc

METERS_PER_DEG_LAT = 111320.0
KNOTS_PER_MPS = 1.943844
# Atmospheric density scale height for the sqrt(density-ratio) descent law.
DENSITY_SCALE_HEIGHT_M = 7000.0


@dataclass(frozen=True)
class WindBand:
    alt_lo_m: float
    alt_hi_m: float
    bearing_deg: float
    speed_mps: float


@dataclass(frozen=True)
class FlightParams:
    launch: GeoFix
    ascent_rate_mps: float = 5.0
    burst_alt_m: float = 27000.0
    descent_rate_sl_mps: float = 7.0
    wind: tuple = ()

    def __post_init__(self):
        if self.ascent_rate_mps <= 0 or self.descent_rate_sl_mps <= 0:
            raise ValidationError("ascent and descent rates must be positive")
        if not 25000.0 <= self.burst_alt_m <= 30000.0:
            raise ValidationError("burst altitude must lie in 25..30 km")
        if self.burst_alt_m <= self.launch.alt_m:
            raise ValidationError("burst altitude must exceed launch altitude")


@dataclass(frozen=True)
class Transmitter:
    callsign: str
    mode: str = "plain"  # or "mice"
    period_s: float = 60.0
    phase_s: float = 0.0
    comment: str = ""
    destination: str = "APRS"

    def __post_init__(self):
        if self.mode not in ("plain", "mice"):
            raise ValidationError(f"unknown beacon mode {self.mode!r}")
        if self.period_s <= 0:
            raise ValidationError("beacon period must be positive")


@dataclass(frozen=True)
class ChannelParams:
    max_range_m: float = 9000.0
    snr_at_edge_db: float = 10.0
    model: str = "hard"  # or "probabilistic"

    def __post_init__(self):
        if self.max_range_m <= 0:
            raise ValidationError("max range must be positive")
        if self.model not in ("hard", "probabilistic"):
            raise ValidationError(f"unknown dropout model {self.model!r}")


@dataclass(frozen=True)
class Beacon:
    """One emitted APRS frame pinned to its transmit time and fix."""

    time: float
    frame: Ax25Frame
    callsign: str
    fix: GeoFix


@dataclass(frozen=True)
class DeliveredBeacon:
    beacon: Beacon
    snr_db: float
    slant_range_m: float


def simulate_trajectory(
    params: FlightParams, start_time: float = 0.0, duration_s: float | None = None
) -> list[GeoFix]:
    """Integrate the flight at 1 Hz; returns time-ordered fixes.

    Linear ascent to the burst altitude, then parachute descent with the
    sea-level rate scaled by exp(alt / 2H) for the thinning air, with
    horizontal advection from the wind band containing the current
    altitude. Ends on touchdown at launch altitude (or ``duration_s``).
    """
    lat = params.launch.lat
    lon = params.launch.lon
    alt = params.launch.alt_m
    ground = params.launch.alt_m
    fixes = [GeoFix(lat, lon, alt, time=start_time)]
    descending = False
    t = 0
    while True:
        t += 1
        if duration_s is not None and t > duration_s:
            break
        if not descending:
            alt += params.ascent_rate_mps
            if alt >= params.burst_alt_m:
                alt = params.burst_alt_m
                descending = True
        else:
            rate = params.descent_rate_sl_mps * math.exp(
                alt / (2.0 * DENSITY_SCALE_HEIGHT_M)
            )
            alt -= rate
            if alt <= ground:
                fixes.append(GeoFix(lat, lon, ground, time=start_time + t))
                break
        east, north = _wind_step(params.wind, alt)
        lat += north / METERS_PER_DEG_LAT
        lon += east / (METERS_PER_DEG_LAT * math.cos(math.radians(lat)))
        fixes.append(GeoFix(lat, lon, alt, time=start_time + t))
        if duration_s is None and t > 86400:
            raise ValidationError("flight failed to land within a day")
    return fixes


def _wind_step(bands, alt: float) -> tuple[float, float]:
    for band in bands:
        if band.alt_lo_m <= alt < band.alt_hi_m:
            bearing = math.radians(band.bearing_deg)
            return (
                band.speed_mps * math.sin(bearing),
                band.speed_mps * math.cos(bearing),
            )
    return 0.0, 0.0


def _course_speed(prev: GeoFix | None, cur: GeoFix) -> tuple[float, float]:
    if prev is None:
        return 0.0, 0.0
    north = (cur.lat - prev.lat) * METERS_PER_DEG_LAT
    east = (
        (cur.lon - prev.lon)
        * METERS_PER_DEG_LAT
        * math.cos(math.radians(cur.lat))
    )
    dt = (cur.time - prev.time) or 1.0
    speed_knots = math.hypot(east, north) / dt * KNOTS_PER_MPS
    course = math.degrees(math.atan2(east, north)) % 360.0
    return course, min(speed_knots, 799.0)


def emit_beacons(trajectory: list[GeoFix], transmitters) -> list[Beacon]:
    """APRS frames for every beacon epoch of every transmitter."""
    if not trajectory:
        return []
    t0 = trajectory[0].time
    beacons = []
    for k, fix in enumerate(trajectory):
        rel = fix.time - t0
        prev = trajectory[k - 1] if k else None
        for tx in transmitters:
            if rel < tx.phase_s or (rel - tx.phase_s) % tx.period_s != 0:
                continue
            course, speed = _course_speed(prev, fix)
            cs = Callsign.parse(tx.callsign)
            if tx.mode == "mice":
                dest, info = encode_mice(fix, course, speed, msg_code=0)
                frame = Ax25Frame(
                    destination=Callsign(dest), source=cs, info=info
                )
            else:
                report = AprsReport(
                    kind=KIND_POSITION_PLAIN,
                    position=fix,
                    symbol=("/", "O"),
                    course_deg=course,
                    speed_knots=speed,
                    comment=tx.comment,
                    altitude_m=fix.alt_m,
                )
                frame = Ax25Frame(
                    destination=Callsign.parse(tx.destination),
                    source=cs,
                    info=encode_position_plain(report),
                )
            beacons.append(Beacon(time=fix.time, frame=frame, callsign=tx.callsign, fix=fix))
    return beacons


class ReceiverScript:
    """Receiver position over time: a static fix or a stepped path."""

    def __init__(self, points: list[tuple[float, GeoFix]]):
        if not points:
            raise ValidationError("receiver script needs at least one point")
        self.points = sorted(points, key=lambda p: p[0])

    @classmethod
    def static(cls, fix: GeoFix) -> "ReceiverScript":
        return cls([(0.0, fix)])

    def at(self, t: float) -> GeoFix:
        current = self.points[0][1]
        for when, fix in self.points:
            if when <= t:
                current = fix
            else:
                break
        return current


def apply_channel(
    beacons: list[Beacon],
    receiver: ReceiverScript,
    channel: ChannelParams,
    seed: int = 0,
) -> tuple[list[DeliveredBeacon], list[Beacon]]:
    """Split emitted beacons into (delivered, dropped) by slant range."""
    rng = np.random.default_rng(seed)
    delivered = []
    dropped = []
    for beacon in beacons:
        rx = receiver.at(beacon.time)
        try:
            slant = pointing(rx, beacon.fix).slant_range_m
        except GeometryError:
            slant = 0.0  # balloon sitting on the receiver: trivially in range
        if channel.model == "hard":
            ok = slant <= channel.max_range_m
            # Keep the stream deterministic whichever model is active.
            rng.random()
        else:
            p = (1.1 * channel.max_range_m - slant) / (0.2 * channel.max_range_m)
            ok = rng.random() < min(1.0, max(0.0, p))
        if ok:
            snr = channel.snr_at_edge_db + 20.0 * math.log10(
                channel.max_range_m / max(slant, 1.0)
            )
            delivered.append(
                DeliveredBeacon(beacon=beacon, snr_db=min(snr, 40.0), slant_range_m=slant)
            )
        else:
            dropped.append(beacon)
    return delivered, dropped


def render_flight_audio(
    delivered: list[DeliveredBeacon],
    cfg: ModemConfig = ModemConfig(),
    snr_db: float | None = None,
    seed: int = 0,
    preamble_flags: int = 16,
    duration_s: float | None = None,
) -> AudioBlock:
    """Place each delivered frame at its timestamp on one audio timeline.

    ``snr_db`` adds white noise over the whole file relative to in-packet
    signal power; None leaves the gaps silent.
    """
    if not delivered:
        raise ValidationError("nothing to render")
    t0 = min(d.beacon.time for d in delivered)
    packets = [
        (d.beacon.time - t0, modulate(frame_to_linebits(d.beacon.frame, preamble_flags), cfg))
        for d in delivered
    ]
    end_s = max(offset + p.duration_s for offset, p in packets)
    if duration_s is not None:
        end_s = max(end_s, duration_s)
    total = int(math.ceil(end_s * cfg.sample_rate)) + 1
    timeline = np.zeros(total)
    power_acc = 0.0
    samples_acc = 0
    for offset, packet in packets:
        start = int(round(offset * cfg.sample_rate))
        timeline[start : start + len(packet)] += packet.samples
        power_acc += float(np.sum(packet.samples**2))
        samples_acc += len(packet)
    if snr_db is not None and samples_acc:
        signal_power = power_acc / samples_acc
        sigma = math.sqrt(signal_power / (10.0 ** (snr_db / 10.0)))
        rng = np.random.default_rng(seed)
        timeline += rng.normal(0.0, sigma, total)
    peak = float(np.max(np.abs(timeline)))
    if peak > 1.0:
        timeline /= peak
    return AudioBlock(timeline, cfg.sample_rate)


# --- own-position walk path (concurrent-mapping scenarios) -------------


@dataclass(frozen=True)
class WalkPath:
    """Circular stroll around a center point, rendered as NMEA sentences."""

    center: GeoFix
    radius_m: float = 150.0
    speed_mps: float = 1.4
    duration_s: float = 600.0
    period_s: float = 1.0

    def fixes(self, start_time: float = 0.0) -> list[tuple[float, GeoFix, float, float]]:
        """(time, fix, course_deg, speed_knots) at each NMEA epoch."""
        out = []
        omega = self.speed_mps / self.radius_m  # rad/s along the circle
        t = 0.0
        while t <= self.duration_s:
            theta = omega * t
            north = self.radius_m * math.cos(theta)
            east = self.radius_m * math.sin(theta)
            lat = self.center.lat + north / METERS_PER_DEG_LAT
            lon = self.center.lon + east / (
                METERS_PER_DEG_LAT * math.cos(math.radians(self.center.lat))
            )
            course = (math.degrees(theta) + 90.0) % 360.0
            fix = GeoFix(lat, lon, self.center.alt_m, time=start_time + t)
            out.append((start_time + t, fix, course, self.speed_mps * KNOTS_PER_MPS))
            t += self.period_s
        return out

    def nmea_lines(self, start_time: float = 0.0) -> list[tuple[float, str]]:
        lines = []
        for t, fix, course, speed in self.fixes(start_time):
            hhmmss = _hhmmss(t)
            lines.append((t, format_gga(fix, hhmmss=hhmmss)))
            lines.append((t, format_rmc(fix, speed, course, hhmmss=hhmmss)))
        return lines


def _hhmmss(t: float) -> str:
    seconds = int(t) % 86400
    return f"{seconds // 3600:02d}{seconds % 3600 // 60:02d}{seconds % 60:02d}"


# --- scenarios ----------------------------------------------------------


@dataclass
class Scenario:
    name: str
    flight: FlightParams
    transmitters: list
    channel: ChannelParams
    receiver: ReceiverScript
    own_path: WalkPath | None = None
    seed: int = 0
    start_time: float = 0.0
    duration_s: float | None = None
    _trajectory: list | None = field(default=None, repr=False)

    def trajectory(self) -> list[GeoFix]:
        if self._trajectory is None:
            self._trajectory = simulate_trajectory(
                self.flight, self.start_time, self.duration_s
            )
        return self._trajectory

    def beacons(self) -> list[Beacon]:
        return emit_beacons(self.trajectory(), self.transmitters)

    def delivered(self) -> tuple[list[DeliveredBeacon], list[Beacon]]:
        return apply_channel(self.beacons(), self.receiver, self.channel, self.seed)


def _fix_from_json(obj: dict, time: float | None = None) -> GeoFix:
    return GeoFix(
        float(obj["lat"]), float(obj["lon"]), float(obj.get("alt_m", 0.0)), time=time
    )


def load_scenario(path) -> Scenario:
    """Parse a scenario JSON document."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)

    flight_doc = doc.get("flight", {})
    wind = tuple(
        WindBand(
            alt_lo_m=float(b["alt_lo_m"]),
            alt_hi_m=float(b["alt_hi_m"]),
            bearing_deg=float(b["bearing_deg"]),
            speed_mps=float(b["speed_mps"]),
        )
        for b in flight_doc.get("wind", ())
    )
    flight = FlightParams(
        launch=_fix_from_json(flight_doc["launch"]),
        ascent_rate_mps=float(flight_doc.get("ascent_rate_mps", 5.0)),
        burst_alt_m=float(flight_doc.get("burst_alt_m", 27000.0)),
        descent_rate_sl_mps=float(flight_doc.get("descent_rate_sl_mps", 7.0)),
        wind=wind,
    )
    transmitters = [
        Transmitter(
            callsign=t["callsign"],
            mode=t.get("mode", "plain"),
            period_s=float(t.get("period_s", 60.0)),
            phase_s=float(t.get("phase_s", 0.0)),
            comment=t.get("comment", ""),
            destination=t.get("destination", "APRS"),
        )
        for t in doc.get("transmitters", [])
    ]
    channel_doc = doc.get("channel", {})
    channel = ChannelParams(
        max_range_m=float(channel_doc.get("max_range_m", 9000.0)),
        snr_at_edge_db=float(channel_doc.get("snr_at_edge_db", 10.0)),
        model=channel_doc.get("model", "hard"),
    )
    receiver_doc = doc.get("receiver", {})
    if "path" in receiver_doc:
        receiver = ReceiverScript(
            [
                (float(p["time"]), _fix_from_json(p))
                for p in receiver_doc["path"]
            ]
        )
    else:
        receiver = ReceiverScript.static(_fix_from_json(receiver_doc))
    own_path = None
    if "own_path" in doc:
        op = doc["own_path"]
        own_path = WalkPath(
            center=_fix_from_json(op["center"]),
            radius_m=float(op.get("radius_m", 150.0)),
            speed_mps=float(op.get("speed_mps", 1.4)),
            duration_s=float(op.get("duration_s", 600.0)),
            period_s=float(op.get("period_s", 1.0)),
        )
    return Scenario(
        name=doc.get("name", "scenario"),
        flight=flight,
        transmitters=transmitters,
        channel=channel,
        receiver=receiver,
        own_path=own_path,
        seed=int(doc.get("seed", 0)),
        start_time=float(doc.get("start_time", 0.0)),
        duration_s=float(doc["duration_s"]) if doc.get("duration_s") else None,
    )


def delivered_to_ndjson(delivered: list[DeliveredBeacon]) -> str:
    """Frame timeline as NDJSON, one delivered beacon per line."""
    lines = []
    for d in delivered:
        lines.append(
            json.dumps(
                {
                    "callsign": d.beacon.callsign,
                    "slant_range_m": round(d.slant_range_m, 1),
                    "snr_db": round(d.snr_db, 1),
                    "time": d.beacon.time,
                    "tnc2": d.beacon.frame.to_tnc2(),
                },
                sort_keys=True,
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")
