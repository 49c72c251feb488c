"""Degrees/decimal-minutes conversions shared by the APRS and NMEA parsers.

Both wire formats carry angles as whole degrees plus decimal minutes
(APRS ``DDMM.mm``, NMEA ``ddmm.mmmm``); keeping the arithmetic here makes
the two parsers exact inverses of each other.
"""

from __future__ import annotations


def degmin_to_degrees(degrees: int, minutes: float, hemisphere: str) -> float:
    """Combine whole degrees + decimal minutes, negating for 'S'/'W'."""
    value = degrees + minutes / 60.0
    if hemisphere in ("S", "W"):
        value = -value
    elif hemisphere not in ("N", "E"):
        raise ValueError(f"bad hemisphere indicator {hemisphere!r}")
    return value


def degrees_to_degmin(value: float) -> tuple[int, float, bool]:
    """Split a signed angle into (whole degrees, decimal minutes, negative)."""
    negative = value < 0
    mag = abs(value)
    degrees = int(mag)
    minutes = (mag - degrees) * 60.0
    # Guard against 59.99999... rolling a full degree after formatting.
    if minutes >= 60.0:
        degrees += 1
        minutes = 0.0
    return degrees, minutes, negative


def truncate_minutes(minutes: float, decimals: int) -> float:
    """Truncate (not round) decimal minutes to a fixed number of places.

    A small epsilon absorbs binary-float artifacts (59.11 stored as
    59.10999...) without disturbing genuine truncation.
    """
    scale = 10**decimals
    return int(minutes * scale + 1e-6) / scale
