"""APRS information-field codec.

Handles plain and compressed position reports, MIC-E destination-encoded
reports, status text, PHG parameters, and `/A=` altitude comments.
Everything else is preserved untouched under kind "other".

Transmitted timestamps are parsed but kept as metadata only; receive
time is authoritative for tracking.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ax25 import Callsign
from .coords import degmin_to_degrees, degrees_to_degmin, truncate_minutes
from .errors import AprsParseError, ValidationError
from .geo import GeoFix

KIND_POSITION_PLAIN = "position_plain"
KIND_POSITION_COMPRESSED = "position_compressed"
KIND_MICE = "mice"
KIND_STATUS = "status"
KIND_OTHER = "other"

KINDS = (
    KIND_POSITION_PLAIN,
    KIND_POSITION_COMPRESSED,
    KIND_MICE,
    KIND_STATUS,
    KIND_OTHER,
)

POSITION_KINDS = (KIND_POSITION_PLAIN, KIND_POSITION_COMPRESSED, KIND_MICE)

FEET_PER_METER = 1.0 / 0.3048

_ALTITUDE_RE = re.compile(r"/A=(\d{6})")
_PHG_RE = re.compile(r"PHG(.{0,4})")
_CSE_SPD_RE = re.compile(r"^(\d{3})/(\d{3})")

# Cell-center fill for 1..4 ambiguous (space) digits of DDMM.mm minutes.
_AMBIGUITY_FILL = {1: "5", 2: "50", 3: "500", 4: "3000"}


@dataclass(frozen=True)
class PhgData:
    """Decoded PHG station parameters (directivity 0 means omni)."""

    power_w: int
    height_ft: int
    gain_db: int
    directivity_deg: int
    codes: str = ""


@dataclass(frozen=True)
class AprsReport:
    """Parsed APRS information field."""

    kind: str
    position: GeoFix | None = None
    symbol: tuple[str, str] | None = None
    course_deg: float | None = None
    speed_knots: float | None = None
    phg: PhgData | None = None
    comment: str = ""
    mice_status: int | None = None
    altitude_m: float | None = None
    timestamp: str | None = None
    ambiguity: int = 0
    raw: bytes = b""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown report kind {self.kind!r}")
        if self.kind in POSITION_KINDS and self.position is None:
            raise ValidationError(f"{self.kind} report needs a position")
        if self.course_deg is not None and not 0.0 <= self.course_deg < 360.0:
            raise ValidationError(f"course {self.course_deg} outside [0, 360)")
        if self.speed_knots is not None and self.speed_knots < 0:
            raise ValidationError("speed must be non-negative")


# --- shared pieces ----------------------------------------------------


def _b91_value(text: str, field: str, offset: int) -> int:
    value = 0
    for i, ch in enumerate(text):
        v = ord(ch) - 33
        if not 0 <= v <= 90:
            raise AprsParseError(
                f"invalid base-91 character {ch!r} in {field}",
                field=field,
                offset=offset + i,
            )
        value = value * 91 + v
    return value


def _fill_ambiguity(digits: str, field: str, offset: int) -> tuple[str, int]:
    """Replace trailing space digits with the cell-center value.

    Returns (concrete digits, ambiguity level). Spaces must be a suffix.
    """
    n_spaces = len(digits) - len(digits.rstrip(" "))
    if n_spaces == 0:
        return digits, 0
    if n_spaces > 4 or " " in digits[: len(digits) - n_spaces]:
        raise AprsParseError(
            f"bad ambiguity spacing in {field}", field=field, offset=offset
        )
    fill = _AMBIGUITY_FILL[n_spaces]
    return digits[: len(digits) - n_spaces] + fill, n_spaces


def _parse_degmin(
    text: str, deg_digits: int, field: str, offset: int
) -> tuple[float, int]:
    """Parse DD(D)MM.mm + hemisphere into signed degrees."""
    want = deg_digits + 5 + 1  # degrees + MM.mm + hemisphere
    if len(text) < want:
        raise AprsParseError(f"{field} too short", field=field, offset=offset)
    body, hemi = text[: want - 1], text[want - 1]
    if body[deg_digits + 2] != ".":
        raise AprsParseError(
            f"missing decimal point in {field}",
            field=field,
            offset=offset + deg_digits + 2,
        )
    digits = body[: deg_digits + 2] + body[deg_digits + 3 :]
    digits, ambiguity = _fill_ambiguity(digits, field, offset)
    if not digits.isdigit():
        raise AprsParseError(
            f"non-digit in {field}: {body!r}", field=field, offset=offset
        )
    expected_hemi = "NS" if deg_digits == 2 else "EW"
    if hemi not in expected_hemi:
        raise AprsParseError(
            f"bad hemisphere {hemi!r} in {field}",
            field=field,
            offset=offset + want - 1,
        )
    degrees = int(digits[:deg_digits])
    minutes = int(digits[deg_digits : deg_digits + 2]) + int(digits[deg_digits + 2 :]) / 100.0
    if minutes >= 60.0:
        raise AprsParseError(
            f"minutes {minutes} out of range in {field}", field=field, offset=offset
        )
    value = degmin_to_degrees(degrees, minutes, hemi)
    limit = 90.0 if deg_digits == 2 else 180.0
    if not -limit <= value <= limit:
        raise AprsParseError(
            f"{field} {value} out of range", field=field, offset=offset
        )
    return value, ambiguity


def _format_degmin(value: float, deg_digits: int, positive: str, negative: str) -> str:
    degrees, minutes, is_negative = degrees_to_degmin(value)
    minutes = truncate_minutes(minutes, 2)
    if minutes >= 60.0:
        degrees += 1
        minutes = 0.0
    hemi = negative if is_negative else positive
    return f"{degrees:0{deg_digits}d}{int(minutes):02d}.{int(round(minutes % 1 * 100)):02d}{hemi}"


def parse_altitude(comment: str) -> float | None:
    """First `/A=nnnnnn` (feet) in a comment, as meters."""
    match = _ALTITUDE_RE.search(comment)
    if not match:
        return None
    return int(match.group(1)) * 0.3048


def _position_fix(lat: float, lon: float, altitude: float | None) -> GeoFix:
    """Build the report's fix; a transmitted altitude beyond the sanity
    bounds is a parse error rather than a crash."""
    alt = altitude if altitude is not None else 0.0
    try:
        return GeoFix(lat, lon, alt)
    except ValidationError as exc:
        raise AprsParseError(str(exc), field="altitude") from exc


def _strip_altitude(comment: str) -> str:
    return _ALTITUDE_RE.sub("", comment, count=1)


def parse_phg(comment: str) -> PhgData | None:
    """Decode the first PHG code found; None when absent."""
    match = _PHG_RE.search(comment)
    if not match:
        return None
    codes = match.group(1)
    if len(codes) < 4 or not codes.isdigit():
        raise AprsParseError(
            f"PHG codes must be 4 digits, got {codes!r}",
            field="phg",
            offset=match.start(),
        )
    p, h, g, d = (int(c) for c in codes)
    return PhgData(
        power_w=p * p,
        height_ft=10 * 2**h,
        gain_db=g,
        directivity_deg=d * 45,
        codes=codes,
    )


# --- plain (uncompressed) position ------------------------------------


def _parse_plain_position(body: str, timestamp: str | None, raw: bytes) -> AprsReport:
    if len(body) < 19:
        raise AprsParseError("plain position too short", field="position", offset=0)
    lat, lat_amb = _parse_degmin(body[0:8], 2, "latitude", 0)
    table = body[8]
    lon, lon_amb = _parse_degmin(body[9:18], 3, "longitude", 9)
    code = body[18]
    rest = body[19:]

    course = speed = None
    phg = None
    ext = _CSE_SPD_RE.match(rest)
    if ext:
        wire_course = int(ext.group(1))
        if wire_course > 0:
            course = float(wire_course % 360)
        speed = float(int(ext.group(2)))
        rest = rest[7:]
    elif rest.startswith("PHG"):
        phg = parse_phg(rest[:7])
        rest = rest[7:]

    altitude = parse_altitude(rest)
    if altitude is not None:
        rest = _strip_altitude(rest)

    return AprsReport(
        kind=KIND_POSITION_PLAIN,
        position=_position_fix(lat, lon, altitude),
        symbol=(table, code),
        course_deg=course,
        speed_knots=speed,
        phg=phg,
        comment=rest,
        altitude_m=altitude,
        timestamp=timestamp,
        ambiguity=max(lat_amb, lon_amb),
        raw=raw,
    )


def encode_position_plain(report: AprsReport) -> bytes:
    """Build `=DDMM.mmN/DDDMM.mmW$...` from a plain position report.

    Hundredths of minutes are truncated, not rounded; that quantization
    (up to 0.01 arc-minute) is the documented round-trip bound.
    """
    if report.kind != KIND_POSITION_PLAIN or report.position is None:
        raise ValidationError("encode_position_plain needs a plain position report")
    table, code = report.symbol if report.symbol else ("/", "O")
    out = "="
    out += _format_degmin(report.position.lat, 2, "N", "S")
    out += table
    out += _format_degmin(report.position.lon, 3, "E", "W")
    out += code
    if report.course_deg is not None and report.speed_knots is not None:
        wire_course = int(round(report.course_deg)) % 360
        out += f"{wire_course if wire_course else 360:03d}"
        out += f"/{min(999, int(round(report.speed_knots))):03d}"
    elif report.phg is not None:
        out += f"PHG{report.phg.codes}"
    if report.altitude_m is not None:
        out += f"/A={int(round(report.altitude_m * FEET_PER_METER)):06d}"
    out += report.comment
    return out.encode("latin-1")


# --- compressed position (decode only) --------------------------------


def _parse_compressed(body: str, timestamp: str | None, raw: bytes) -> AprsReport:
    if len(body) < 13:
        raise AprsParseError(
            "compressed position needs 13 bytes", field="position", offset=0
        )
    table = body[0]
    lat = 90.0 - _b91_value(body[1:5], "latitude", 1) / 380926.0
    lon = -180.0 + _b91_value(body[5:9], "longitude", 5) / 190463.0
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise AprsParseError("compressed position out of range", field="position", offset=1)
    code = body[9]
    c, s, t = body[10], body[11], body[12]

    course = speed = None
    altitude = None
    if c != " ":
        cv = ord(c) - 33
        sv = ord(s) - 33
        tv = ord(t) - 33
        if not (0 <= cv <= 90 and 0 <= sv <= 90):
            raise AprsParseError(
                "bad compressed course/speed bytes", field="course_speed", offset=10
            )
        if tv >= 0 and (tv & 0x18) == 0x10:
            altitude = (1.002 ** (cv * 91 + sv)) * 0.3048
        elif cv <= 89:
            course = float(cv * 4 % 360)
            speed = round(1.08**sv - 1.0, 1)

    rest = body[13:]
    comment_alt = parse_altitude(rest)
    if comment_alt is not None:
        altitude = comment_alt
        rest = _strip_altitude(rest)

    return AprsReport(
        kind=KIND_POSITION_COMPRESSED,
        position=_position_fix(lat, lon, altitude),
        symbol=(table, code),
        course_deg=course,
        speed_knots=speed,
        comment=rest,
        altitude_m=altitude,
        timestamp=timestamp,
        raw=raw,
    )


# --- MIC-E -------------------------------------------------------------

_MICE_TYPE_BYTES = (0x60, 0x27)  # ` current fix, ' old fix


def _mice_dest_char(ch: str) -> tuple[str, int, bool]:
    """Destination char -> (digit or space, message bit, north/west/+100)."""
    if "0" <= ch <= "9":
        return ch, 0, False
    if ch == "L":
        return " ", 0, False
    if "A" <= ch <= "J":
        return chr(ord(ch) - ord("A") + ord("0")), 1, False
    if ch == "K":
        return " ", 1, False
    if "P" <= ch <= "Y":
        return chr(ord(ch) - ord("P") + ord("0")), 1, True
    if ch == "Z":
        return " ", 1, True
    raise AprsParseError(
        f"{ch!r} is not a MIC-E destination character", field="destination"
    )


def decode_mice(destination: Callsign, info: bytes) -> AprsReport:
    """Decode a MIC-E report from the destination field plus info bytes."""
    dest = destination.base
    if len(dest) != 6:
        raise AprsParseError(
            f"MIC-E destination must be 6 characters, got {dest!r}",
            field="destination",
        )
    if len(info) < 9 or info[0] not in _MICE_TYPE_BYTES:
        raise AprsParseError("not a MIC-E information field", field="info", offset=0)

    digits = ""
    msg_bits = []
    north = west = lon_offset = False
    for i, ch in enumerate(dest):
        digit, bit, flag = _mice_dest_char(ch)
        digits += digit
        if i < 3:
            msg_bits.append(bit)
        elif i == 3:
            north = flag
        elif i == 4:
            lon_offset = flag
        else:
            west = flag

    digits, ambiguity = _fill_ambiguity(digits, "latitude", 0)
    lat_deg = int(digits[0:2])
    lat_min = int(digits[2:4]) + int(digits[4:6]) / 100.0
    if lat_deg > 90 or lat_min >= 60.0:
        raise AprsParseError("MIC-E latitude out of range", field="latitude")
    lat = degmin_to_degrees(lat_deg, lat_min, "N" if north else "S")

    d28 = info[1] - 28
    m28 = info[2] - 28
    h28 = info[3] - 28
    if min(d28, m28, h28) < 0:
        raise AprsParseError("MIC-E longitude bytes out of range", field="longitude", offset=1)
    lon_deg = d28 + (100 if lon_offset else 0)
    if 180 <= lon_deg <= 189:
        lon_deg -= 80
    elif 190 <= lon_deg <= 199:
        lon_deg -= 190
    lon_min = m28 - 60 if m28 >= 60 else m28
    if lon_deg > 180 or not 0 <= lon_min <= 59 or h28 > 99:
        raise AprsParseError("MIC-E longitude out of range", field="longitude", offset=1)
    lon = degmin_to_degrees(lon_deg, lon_min + h28 / 100.0, "W" if west else "E")

    sp = info[4] - 28
    dc = info[5] - 28
    se = info[6] - 28
    if min(sp, dc, se) < 0 or se > 99:
        raise AprsParseError("MIC-E speed/course bytes out of range", field="course_speed", offset=4)
    speed = sp * 10 + dc // 10
    if speed >= 800:
        speed -= 800
    course = (dc % 10) * 100 + se
    if course >= 400:
        course -= 400

    code = chr(info[7])
    table = chr(info[8])

    altitude = None
    rest = info[9:].decode("latin-1")
    if len(rest) >= 4 and rest[3] == "}":
        altitude = float(_b91_value(rest[0:3], "altitude", 9) - 10000)
        rest = rest[4:]

    message = (msg_bits[0] << 2) | (msg_bits[1] << 1) | msg_bits[2]

    return AprsReport(
        kind=KIND_MICE,
        position=_position_fix(lat, lon, altitude),
        symbol=(table, code),
        course_deg=float(course % 360),
        speed_knots=float(speed),
        comment=rest,
        mice_status=message,
        altitude_m=altitude,
        ambiguity=ambiguity,
        raw=bytes(info),
    )


def encode_mice(
    fix: GeoFix,
    course_deg: float,
    speed_knots: float,
    msg_code: int = 0,
    symbol: tuple[str, str] = ("/", "O"),
    include_altitude: bool = True,
    current_fix: bool = True,
) -> tuple[str, bytes]:
    """Encode position/course/speed as (destination text, info bytes).

    Inverse of :func:`decode_mice` up to the format's quantization
    (0.01 arc-minute, 1 knot, 1 degree).
    """
    if not 0 <= msg_code <= 7:
        raise ValidationError("MIC-E message code must be 0..7")
    if not 0.0 <= course_deg < 360.0:
        raise ValidationError(f"course {course_deg} outside [0, 360)")
    if not 0.0 <= speed_knots <= 799.0:
        raise ValidationError(f"speed {speed_knots} outside 0..799 knots")

    lat_deg, lat_min, lat_negative = degrees_to_degmin(fix.lat)
    lat_min = truncate_minutes(lat_min, 2)
    hundredths = int(round(lat_min % 1 * 100))
    digits = f"{lat_deg:02d}{int(lat_min):02d}{hundredths:02d}"

    lon_deg, lon_min, lon_negative = degrees_to_degmin(fix.lon)
    lon_min = truncate_minutes(lon_min, 2)

    if lon_deg <= 9:
        lon_d, lon_offset = lon_deg + 118, True
    elif lon_deg <= 99:
        lon_d, lon_offset = lon_deg + 28, False
    elif lon_deg <= 109:
        lon_d, lon_offset = lon_deg + 8, True
    else:
        lon_d, lon_offset = lon_deg - 72, True

    msg_bits = ((msg_code >> 2) & 1, (msg_code >> 1) & 1, msg_code & 1)
    dest = ""
    for i, digit in enumerate(digits):
        if i < 3:
            flag = bool(msg_bits[i])
        elif i == 3:
            flag = not lat_negative  # north
        elif i == 4:
            flag = lon_offset
        else:
            flag = lon_negative  # west
        dest += chr(ord(digit) - ord("0") + ord("P")) if flag else digit

    lon_m = int(lon_min)
    lon_h = int(round(lon_min % 1 * 100))
    info = bytearray()
    info.append(0x60 if current_fix else 0x27)
    info.append(lon_d)
    info.append(lon_m + 88 if lon_m <= 9 else lon_m + 28)
    info.append(lon_h + 28)

    speed = int(round(speed_knots))
    course = int(round(course_deg)) % 360
    info.append(speed // 10 + 28)
    info.append((speed % 10) * 10 + course // 100 + 28)
    info.append(course % 100 + 28)
    info.append(ord(symbol[1]))
    info.append(ord(symbol[0]))

    if include_altitude:
        value = int(round(fix.alt_m)) + 10000
        if not 0 <= value < 91**3:
            raise ValidationError(f"altitude {fix.alt_m} not MIC-E encodable")
        chars = [
            chr(value // (91 * 91) + 33),
            chr(value // 91 % 91 + 33),
            chr(value % 91 + 33),
        ]
        info += ("".join(chars) + "}").encode("latin-1")

    return dest, bytes(info)


# --- timestamps --------------------------------------------------------


def _parse_timestamp(text: str) -> str:
    """Validate the 7-char timestamp of '/'/'@' reports; kept as metadata."""
    if len(text) != 7:
        raise AprsParseError("timestamp must be 7 characters", field="timestamp", offset=1)
    if text[6] in ("z", "/", "h"):
        if not text[:6].isdigit():
            raise AprsParseError(
                f"non-digit timestamp {text!r}", field="timestamp", offset=1
            )
        return text
    raise AprsParseError(
        f"unknown timestamp suffix {text[6]!r}", field="timestamp", offset=7
    )


# --- dispatch ----------------------------------------------------------


def parse_info(info: bytes, destination: Callsign) -> AprsReport:
    """Parse one APRS information field.

    Dispatch is total: every input yields exactly one report kind or a
    :class:`AprsParseError`; nothing else escapes.
    """
    if not info:
        raise AprsParseError("empty information field", field="info", offset=0)
    info = bytes(info)
    first = info[0]

    if first in _MICE_TYPE_BYTES:
        return decode_mice(destination, info)

    text = info.decode("latin-1")

    if first in (ord("!"), ord("=")):
        return _dispatch_position(text[1:], None, info)
    if first in (ord("/"), ord("@")):
        timestamp = _parse_timestamp(text[1:8])
        return _dispatch_position(text[8:], timestamp, info)
    if first == ord(">"):
        return AprsReport(kind=KIND_STATUS, comment=text[1:], raw=info)
    return AprsReport(kind=KIND_OTHER, comment=text, raw=info)


def _dispatch_position(body: str, timestamp: str | None, raw: bytes) -> AprsReport:
    if not body:
        raise AprsParseError("empty position body", field="position", offset=1)
    lead = body[0]
    if lead.isdigit() or lead == " ":
        return _parse_plain_position(body, timestamp, raw)
    if lead in "/\\" or "A" <= lead <= "Z" or "a" <= lead <= "j":
        return _parse_compressed(body, timestamp, raw)
    raise AprsParseError(
        f"unrecognized position lead byte {lead!r}", field="position", offset=1
    )
