"""WGS-84 geodesy: ECEF/ENU conversions, azimuth/elevation/slant range,
and gain lookup over a tabulated antenna pattern.

The pointing math is exact ECEF/ENU geometry, not flat-earth, so it is
correct at every range that matters for balloon chasing.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GeometryError, ValidationError

WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)


@dataclass(frozen=True)
class GeoFix:
    """WGS-84 position with MSL-approximate altitude and a timestamp."""

    lat: float
    lon: float
    alt_m: float = 0.0
    time: float | None = None

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValidationError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValidationError(f"longitude {self.lon} outside [-180, 180]")
        if not -500.0 <= self.alt_m <= 100000.0:
            raise ValidationError(f"altitude {self.alt_m} m outside sanity bounds")


@dataclass(frozen=True)
class PointingSolution:
    """Antenna pointing answer: where to aim and how far."""

    azimuth_deg: float
    elevation_deg: float
    slant_range_m: float
    azimuth_undefined: bool = False


def geodetic_to_ecef(fix: GeoFix) -> tuple[float, float, float]:
    """Geodetic latitude/longitude/height to earth-centered cartesian."""
    lat = math.radians(fix.lat)
    lon = math.radians(fix.lon)
    sin_lat = math.sin(lat)
    cos_lat = math.cos(lat)
    n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
    x = (n + fix.alt_m) * cos_lat * math.cos(lon)
    y = (n + fix.alt_m) * cos_lat * math.sin(lon)
    z = (n * (1.0 - WGS84_E2) + fix.alt_m) * sin_lat
    return x, y, z


def enu_vector(origin: GeoFix, target: GeoFix) -> tuple[float, float, float]:
    """East/north/up components of (target - origin) in origin's frame."""
    ox, oy, oz = geodetic_to_ecef(origin)
    tx, ty, tz = geodetic_to_ecef(target)
    dx, dy, dz = tx - ox, ty - oy, tz - oz
    lat = math.radians(origin.lat)
    lon = math.radians(origin.lon)
    sin_lat, cos_lat = math.sin(lat), math.cos(lat)
    sin_lon, cos_lon = math.sin(lon), math.cos(lon)
    east = -sin_lon * dx + cos_lon * dy
    north = -sin_lat * cos_lon * dx - sin_lat * sin_lon * dy + cos_lat * dz
    up = cos_lat * cos_lon * dx + cos_lat * sin_lon * dy + sin_lat * dz
    return east, north, up


def pointing(origin: GeoFix, target: GeoFix) -> PointingSolution:
    """Azimuth (true, clockwise), elevation and slant range to a target."""
    east, north, up = enu_vector(origin, target)
    slant = math.sqrt(east * east + north * north + up * up)
    if slant < 1e-6:
        raise GeometryError("origin and target coincide")
    horizontal = math.hypot(east, north)
    elevation = math.degrees(math.atan2(up, horizontal))
    # Below ~one part in 1e9 of the range the azimuth is numerically
    # meaningless: straight up or straight down.
    if horizontal <= 1e-9 * slant:
        return PointingSolution(0.0, math.copysign(90.0, up), slant, True)
    azimuth = math.degrees(math.atan2(east, north)) % 360.0
    return PointingSolution(azimuth, elevation, slant, False)


class AntennaPattern:
    """Gain table sampled on an (azimuth offset, elevation offset) grid.

    Offsets are degrees away from boresight; gain is dBi. Lookups use
    bilinear interpolation, azimuth wraps at +/-180, elevation clamps.
    """

    def __init__(self, az_deg, el_deg, gain_dbi):
        self.az = np.asarray(az_deg, dtype=np.float64)
        self.el = np.asarray(el_deg, dtype=np.float64)
        self.gain = np.asarray(gain_dbi, dtype=np.float64)
        if self.az.size == 0 or self.el.size == 0 or self.gain.size == 0:
            raise ConfigError("empty antenna pattern table")
        if self.gain.shape != (self.el.size, self.az.size):
            raise ConfigError(
                f"gain grid {self.gain.shape} does not match "
                f"{self.el.size} elevations x {self.az.size} azimuths"
            )
        if np.any(np.diff(self.az) <= 0) or np.any(np.diff(self.el) <= 0):
            raise ConfigError("pattern axes must be strictly increasing")
        self.boresight_gain_dbi = float(self.lookup(0.0, 0.0))
        if self.boresight_gain_dbi < float(self.gain.max()) - 1e-9:
            raise ConfigError("pattern boresight is not the table maximum")

    @classmethod
    def from_csv(cls, path) -> "AntennaPattern":
        """Load `az_deg,el_deg,gain_dbi` rows; grid inferred, order free."""
        cells = {}
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            required = {"az_deg", "el_deg", "gain_dbi"}
            if reader.fieldnames is None or not required.issubset(reader.fieldnames):
                raise ConfigError(f"pattern CSV must have columns {sorted(required)}")
            for row in reader:
                try:
                    az = float(row["az_deg"])
                    el = float(row["el_deg"])
                    gain = float(row["gain_dbi"])
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"bad pattern row {row!r}") from exc
                cells[(az, el)] = gain
        if not cells:
            raise ConfigError("pattern CSV contains no rows")
        az_axis = sorted({az for az, _ in cells})
        el_axis = sorted({el for _, el in cells})
        grid = np.full((len(el_axis), len(az_axis)), np.nan)
        for (az, el), gain in cells.items():
            grid[el_axis.index(el), az_axis.index(az)] = gain
        if np.isnan(grid).any():
            raise ConfigError("pattern grid has holes; every (az, el) pair needed")
        return cls(az_axis, el_axis, grid)

    def lookup(self, az_off: float, el_off: float) -> float:
        """Bilinear gain at an offset; az wrapped, el clamped to the grid."""
        az = (az_off + 180.0) % 360.0 - 180.0
        az = min(max(az, self.az[0]), self.az[-1])
        el = min(max(el_off, self.el[0]), self.el[-1])
        i = int(np.clip(np.searchsorted(self.az, az) - 1, 0, self.az.size - 2))
        j = int(np.clip(np.searchsorted(self.el, el) - 1, 0, self.el.size - 2))
        ax0, ax1 = self.az[i], self.az[i + 1]
        ey0, ey1 = self.el[j], self.el[j + 1]
        tx = 0.0 if ax1 == ax0 else (az - ax0) / (ax1 - ax0)
        ty = 0.0 if ey1 == ey0 else (el - ey0) / (ey1 - ey0)
        g00 = self.gain[j, i]
        g01 = self.gain[j, i + 1]
        g10 = self.gain[j + 1, i]
        g11 = self.gain[j + 1, i + 1]
        return float(
            g00 * (1 - tx) * (1 - ty)
            + g01 * tx * (1 - ty)
            + g10 * (1 - tx) * ty
            + g11 * tx * ty
        )


def pattern_gain(pattern: AntennaPattern, az_off: float, el_off: float) -> float:
    """Gain in dBi at the given offset from boresight."""
    return pattern.lookup(az_off, el_off)


def gain_fraction(pattern: AntennaPattern, deviation_deg: float) -> float:
    """Fraction of boresight power left when aimed off by ``deviation_deg``.

    Evaluated along the azimuth cut through boresight.
    """
    if deviation_deg < 0:
        raise ValidationError("deviation must be non-negative")
    off = pattern.lookup(deviation_deg, 0.0)
    return 10.0 ** ((off - pattern.boresight_gain_dbi) / 10.0)
