"""Geodetic <-> Cartesian conversions and physical constants.

Two frames are supported:

``paper``
    A flat frame whose origin is the 0 deg latitude / 0 deg longitude point.
    ``x`` grows with latitude, ``y`` with longitude, ``z`` is the height above
    the surface; all in km. Degrees convert to km with a fixed scale per
    axis, so the frame is linear in the angles.
``spherical``
    Earth-centred Cartesian coordinates on a sphere of radius ``R``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import InvalidArgument

Frame = Literal["paper", "spherical"]
FRAMES = ("paper", "spherical")

SPEED_OF_LIGHT_KM_S = 299792.458

# Carrier frequencies, MHz.
L1_MHZ = 1575.42
L2_MHZ = 1227.60
CA_CHIP_RATE_HZ = 1.023e6
CA_CODE_LENGTH = 1023
NAV_BIT_RATE_BPS = 50


@dataclass(frozen=True)
class GeodeticCoord:
    latitude_deg: float
    longitude_deg: float
    height_km: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.latitude_deg <= 90.0:
            raise InvalidArgument(f"latitude {self.latitude_deg} outside [-90, 90]")
        if not -180.0 <= self.longitude_deg <= 180.0:
            raise InvalidArgument(f"longitude {self.longitude_deg} outside [-180, 180]")
        if not self.height_km >= -10.0:
            raise InvalidArgument(f"height {self.height_km} km below -10 km")


@dataclass(frozen=True)
class CartesianCoord:
    x_km: float
    y_km: float
    z_km: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x_km, self.y_km, self.z_km)):
            raise InvalidArgument(f"non-finite coordinate {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x_km, self.y_km, self.z_km])

    @classmethod
    def from_array(cls, a) -> "CartesianCoord":
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def distance_to(self, other: "CartesianCoord") -> float:
        return math.dist((self.x_km, self.y_km, self.z_km), (other.x_km, other.y_km, other.z_km))


def _truncate_cm(km: float) -> float:
    # The published arc lengths are truncated, not rounded, to 0.01 km.
    return math.floor(km * 100.0) / 100.0


@dataclass(frozen=True)
class EarthModel:
    radius_km: float = 6400.0
    speed_of_light_km_per_s: float = SPEED_OF_LIGHT_KM_S

    def __post_init__(self):
        if not self.radius_km > 0:
            raise InvalidArgument("radius_km must be positive")
        if not self.speed_of_light_km_per_s > 0:
            raise InvalidArgument("speed of light must be positive")

    @property
    def circumference_km(self) -> float:
        return 2.0 * math.pi * self.radius_km

    @property
    def quarter_circumference_km(self) -> float:
        return _truncate_cm(self.circumference_km / 4.0)

    @property
    def semi_circumference_km(self) -> float:
        return _truncate_cm(self.circumference_km / 2.0)

    @property
    def km_per_deg_lat(self) -> float:
        # 90 degrees of latitude span the quarter circumference.
        return self.quarter_circumference_km / 90.0

    @property
    def km_per_deg_lon(self) -> float:
        # 90 degrees of longitude are laid over the semi circumference.
        return self.semi_circumference_km / 90.0


DEFAULT_EARTH = EarthModel()


def to_cartesian_paper(g: GeodeticCoord, m: EarthModel = DEFAULT_EARTH) -> CartesianCoord:
    return CartesianCoord(
        g.latitude_deg * m.km_per_deg_lat,
        g.longitude_deg * m.km_per_deg_lon,
        g.height_km,
    )


def inverse_paper(c: CartesianCoord, m: EarthModel = DEFAULT_EARTH) -> GeodeticCoord:
    return GeodeticCoord(
        c.x_km / m.km_per_deg_lat,
        c.y_km / m.km_per_deg_lon,
        c.z_km,
    )


def to_cartesian_spherical(g: GeodeticCoord, m: EarthModel = DEFAULT_EARTH) -> CartesianCoord:
    r = m.radius_km + g.height_km
    lat = math.radians(g.latitude_deg)
    lon = math.radians(g.longitude_deg)
    if abs(g.latitude_deg) == 90.0:
        # cos(90 deg) is not exactly zero in floating point; pin the pole.
        return CartesianCoord(0.0, 0.0, math.copysign(r, g.latitude_deg))
    return CartesianCoord(
        r * math.cos(lat) * math.cos(lon),
        r * math.cos(lat) * math.sin(lon),
        r * math.sin(lat),
    )


def inverse_spherical(c: CartesianCoord, m: EarthModel = DEFAULT_EARTH) -> GeodeticCoord:
    x, y, z = c.x_km, c.y_km, c.z_km
    rho = math.hypot(x, y)
    r = math.hypot(rho, z)
    if r == 0.0:
        raise InvalidArgument("the Earth centre has no geodetic coordinates")
    return GeodeticCoord(
        math.degrees(math.atan2(z, rho)),
        math.degrees(math.atan2(y, x)) if rho > 0 else 0.0,
        r - m.radius_km,
    )


def geodetic_to_frame(g: GeodeticCoord, m: EarthModel, frame: Frame) -> CartesianCoord:
    if frame == "paper":
        return to_cartesian_paper(g, m)
    if frame == "spherical":
        return to_cartesian_spherical(g, m)
    raise InvalidArgument(f"unknown frame {frame!r}")


def frame_to_geodetic(c: CartesianCoord, m: EarthModel, frame: Frame) -> GeodeticCoord:
    if frame == "paper":
        return inverse_paper(c, m)
    if frame == "spherical":
        return inverse_spherical(c, m)
    raise InvalidArgument(f"unknown frame {frame!r}")


def plane_to_frame(x_km: float, y_km: float, m: EarthModel, frame: Frame, height_km: float = 0.0):
    """Map a planar map coordinate (flat-frame x/y) to a 3-D frame position."""
    if frame == "paper":
        return CartesianCoord(x_km, y_km, height_km)
    return geodetic_to_frame(inverse_paper(CartesianCoord(x_km, y_km, height_km), m), m, frame)


def frame_to_plane(c: CartesianCoord, m: EarthModel, frame: Frame) -> tuple[float, float]:
    if frame == "paper":
        return c.x_km, c.y_km
    p = to_cartesian_paper(frame_to_geodetic(c, m, frame), m)
    return p.x_km, p.y_km


def up_vector(p, frame: Frame) -> np.ndarray:
    """Local vertical at ``p`` (array or CartesianCoord)."""
    if frame == "paper":
        return np.array([0.0, 0.0, 1.0])
    a = p.as_array() if isinstance(p, CartesianCoord) else np.asarray(p, dtype=float)
    return a / np.linalg.norm(a)


def surface_distance_km(p, m: EarthModel, frame: Frame) -> float:
    """Distance of ``p`` from the Earth's surface in the given frame."""
    a = p.as_array() if isinstance(p, CartesianCoord) else np.asarray(p, dtype=float)
    if frame == "paper":
        return abs(float(a[2]))
    return abs(float(np.linalg.norm(a)) - m.radius_km)


def horizontal_error_km(estimate, truth, frame: Frame) -> float:
    """Length of the estimate-truth difference projected on the local horizontal."""
    e = estimate.as_array() if isinstance(estimate, CartesianCoord) else np.asarray(estimate, float)
    t = truth.as_array() if isinstance(truth, CartesianCoord) else np.asarray(truth, float)
    d = e - t
    up = up_vector(t, frame)
    return float(np.linalg.norm(d - np.dot(d, up) * up))
