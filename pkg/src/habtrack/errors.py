"""Exception types shared across the package."""


class HabtrackError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(HabtrackError, ValueError):
    """Invalid configuration (modem settings, service wiring, patterns)."""


class ValidationError(HabtrackError, ValueError):
    """A domain value violates its invariants (callsign, frame, fix)."""


class AprsParseError(HabtrackError, ValueError):
    """APRS information field could not be parsed.

    Carries the offending field name and byte offset when known.
    """

    def __init__(self, message, field=None, offset=None):
        super().__init__(message)
        self.field = field
        self.offset = offset


class NmeaFramingError(HabtrackError, ValueError):
    """Line is not an NMEA sentence (missing '$' framing)."""


class GeometryError(HabtrackError, ValueError):
    """Degenerate geometry, e.g. pointing from a position to itself."""
