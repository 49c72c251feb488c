"""NMEA-0183 sentence parsing for the chase team's own GPS.

Only GGA and RMC feed the own-position fix (together they carry
position, altitude, course and speed); everything else is parsed and
ignored. Coordinate arithmetic shares the same helpers as the APRS
codec so the two stay exact inverses.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .coords import degmin_to_degrees
from .errors import NmeaFramingError, ValidationError
from .geo import GeoFix


class FixQuality(Enum):
    NONE = "none"
    GPS = "gps"
    DGPS = "dgps"


@dataclass(frozen=True)
class NmeaSentence:
    talker: str
    type: str
    fields: tuple
    checksum_ok: bool
    raw: str = ""


@dataclass(frozen=True)
class OwnFix:
    """Latest own-position state distilled from the NMEA stream."""

    position: GeoFix | None = None
    course_deg: float | None = None
    speed_knots: float | None = None
    fix_quality: FixQuality = FixQuality.NONE
    satellites: int = 0
    updated_at: float | None = None


def nmea_checksum(payload: str) -> int:
    """XOR of all characters between '$' and '*'."""
    value = 0
    for ch in payload:
        value ^= ord(ch)
    return value


def parse_sentence(line: str) -> NmeaSentence:
    """Split one NMEA line and verify its checksum.

    A checksum failure still returns the parsed fields with
    ``checksum_ok=False``; only a missing '$' is a framing error.
    """
    line = line.strip("\r\n")
    if not line.startswith("$"):
        raise NmeaFramingError(f"NMEA line must start with '$': {line!r}")
    body = line[1:]
    payload, star, sum_text = body.partition("*")
    checksum_ok = False
    if star and len(sum_text) >= 2:
        try:
            checksum_ok = int(sum_text[:2], 16) == nmea_checksum(payload)
        except ValueError:
            checksum_ok = False
    fields = payload.split(",")
    head = fields[0]
    talker, stype = (head[:2], head[2:]) if len(head) >= 5 else ("", head)
    return NmeaSentence(
        talker=talker,
        type=stype,
        fields=tuple(fields[1:]),
        checksum_ok=checksum_ok,
        raw=line,
    )


def _parse_coord(value: str, hemi: str, deg_digits: int) -> float | None:
    if not value or not hemi:
        return None
    try:
        degrees = int(value[:deg_digits])
        minutes = float(value[deg_digits:])
        return degmin_to_degrees(degrees, minutes, hemi)
    except ValueError:
        return None


def _parse_float(value: str) -> float | None:
    try:
        return float(value)
    except (TypeError, ValueError):
        return None


def apply_sentence(
    state: OwnFix,
    sentence: NmeaSentence,
    at: float | None = None,
    counters: dict | None = None,
) -> OwnFix:
    """Fold one sentence into the own-fix state (last writer wins).

    Sentences with bad checksums leave the state untouched. Individual
    unparseable fields keep their prior values; when a ``counters`` dict
    is passed, its ``"bad_field"`` entry counts them.
    """

    def miss():
        if counters is not None:
            counters["bad_field"] = counters.get("bad_field", 0) + 1

    if not sentence.checksum_ok:
        return state
    if sentence.type == "GGA":
        return _apply_gga(state, sentence.fields, at, miss)
    if sentence.type == "RMC":
        return _apply_rmc(state, sentence.fields, at, miss)
    return state


def _get(fields, index) -> str:
    return fields[index] if index < len(fields) else ""


def _apply_gga(state: OwnFix, f: tuple, at, miss) -> OwnFix:
    # GGA: time, lat, N/S, lon, E/W, quality, sats, hdop, alt, M, ...
    lat = _parse_coord(_get(f, 1), _get(f, 2), 2)
    lon = _parse_coord(_get(f, 3), _get(f, 4), 3)
    quality_raw = _parse_float(_get(f, 5))
    sats = _parse_float(_get(f, 6))
    alt = _parse_float(_get(f, 8))

    if quality_raw is None:
        miss()
        quality = state.fix_quality
    elif quality_raw == 0:
        quality = FixQuality.NONE
    elif quality_raw == 2:
        quality = FixQuality.DGPS
    else:
        quality = FixQuality.GPS

    prev = state.position
    if lat is None or lon is None:
        if _get(f, 1) or _get(f, 3):
            miss()
        position = prev
    else:
        if alt is None:
            if _get(f, 8):
                miss()
            alt = prev.alt_m if prev else 0.0
        try:
            position = GeoFix(lat, lon, alt, time=at)
        except ValidationError:
            miss()
            position = prev

    return replace(
        state,
        position=position,
        fix_quality=quality,
        satellites=int(sats) if sats is not None else state.satellites,
        updated_at=at if at is not None else state.updated_at,
    )


def _apply_rmc(state: OwnFix, f: tuple, at, miss) -> OwnFix:
    # RMC: time, status, lat, N/S, lon, E/W, speed, course, date, ...
    status = _get(f, 1)
    if status == "V":
        # Void fix: position kept as stale, quality drops.
        return replace(
            state,
            fix_quality=FixQuality.NONE,
            updated_at=at if at is not None else state.updated_at,
        )
    lat = _parse_coord(_get(f, 2), _get(f, 3), 2)
    lon = _parse_coord(_get(f, 4), _get(f, 5), 3)
    speed = _parse_float(_get(f, 6))
    course = _parse_float(_get(f, 7))

    position = state.position
    if lat is not None and lon is not None:
        alt = position.alt_m if position else 0.0
        try:
            position = GeoFix(lat, lon, alt, time=at)
        except ValidationError:
            miss()
    elif _get(f, 2) or _get(f, 4):
        miss()

    quality = state.fix_quality
    if status == "A" and quality is FixQuality.NONE:
        quality = FixQuality.GPS

    if course is not None:
        course = course % 360.0
    elif _get(f, 7):
        miss()
    if speed is None and _get(f, 6):
        miss()

    return replace(
        state,
        position=position,
        course_deg=course if course is not None else state.course_deg,
        speed_knots=speed if speed is not None else state.speed_knots,
        fix_quality=quality,
        updated_at=at if at is not None else state.updated_at,
    )


def format_gga(fix: GeoFix, quality: int = 1, satellites: int = 8, hhmmss: str = "000000") -> str:
    """Render a GGA sentence (used by the flight simulator)."""
    lat_txt, lat_hemi = _format_nmea_coord(fix.lat, 2)
    lon_txt, lon_hemi = _format_nmea_coord(fix.lon, 3)
    payload = (
        f"GPGGA,{hhmmss}.00,{lat_txt},{lat_hemi},{lon_txt},{lon_hemi},"
        f"{quality},{satellites:02d},0.9,{fix.alt_m:.1f},M,0.0,M,,"
    )
    return f"${payload}*{nmea_checksum(payload):02X}"


def format_rmc(
    fix: GeoFix,
    speed_knots: float = 0.0,
    course_deg: float = 0.0,
    hhmmss: str = "000000",
    ddmmyy: str = "010100",
) -> str:
    """Render an RMC sentence (used by the flight simulator)."""
    lat_txt, lat_hemi = _format_nmea_coord(fix.lat, 2)
    lon_txt, lon_hemi = _format_nmea_coord(fix.lon, 3)
    payload = (
        f"GPRMC,{hhmmss}.00,A,{lat_txt},{lat_hemi},{lon_txt},{lon_hemi},"
        f"{speed_knots:.1f},{course_deg:.1f},{ddmmyy},,,A"
    )
    return f"${payload}*{nmea_checksum(payload):02X}"


def _format_nmea_coord(value: float, deg_digits: int) -> tuple[str, str]:
    from .coords import degrees_to_degmin

    degrees, minutes, negative = degrees_to_degmin(value)
    # Keep the rendered minutes below 60 after %.4f rounding.
    minutes = min(minutes, 59.9999)
    if deg_digits == 2:
        hemi = "S" if negative else "N"
    else:
        hemi = "W" if negative else "E"
    return f"{degrees:0{deg_digits}d}{minutes:07.4f}", hemi
