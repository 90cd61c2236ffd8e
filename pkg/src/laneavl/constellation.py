"""Satellite truth states, orbit propagation and pseudorange synthesis."""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from .errors import ExcludedSatelliteError, InvalidArgument, StaleEphemerisError
from .geodesy import SPEED_OF_LIGHT_KM_S, CartesianCoord, Frame, up_vector
from .signal_codes import Almanac, AlmanacEntry, Ephemeris, Orbit

EPHEMERIS_UPDATE_S = 2 * 3600.0
EPHEMERIS_VALIDITY_S = 4 * 3600.0


@dataclass(frozen=True)
class SatelliteState:
    prn_id: int
    position: CartesianCoord
    clock_error_s: float = 0.0
    healthy: bool = True

    def __post_init__(self):
        if not abs(self.clock_error_s) < 1e-2:
            raise InvalidArgument(f"PRN {self.prn_id}: clock error {self.clock_error_s} s too large")


@dataclass(frozen=True)
class ErrorModel:
    """Error terms injected into synthesized pseudoranges.

    ``iono_delay_s`` is either one delay for every satellite or a mapping
    ``prn -> delay``; missing PRNs get no delay.
    """

    iono_delay_s: float | Mapping = 0.0
    receiver_noise_sigma_km: float = 0.0
    receiver_clock_bias_s: float = 0.0

    def __post_init__(self):
        if not self.receiver_noise_sigma_km >= 0:
            raise InvalidArgument("receiver_noise_sigma_km must be >= 0")

    def iono_for(self, prn_id: int) -> float:
        if isinstance(self.iono_delay_s, Mapping):
            return float(self.iono_delay_s.get(prn_id, 0.0))
        return float(self.iono_delay_s)


@dataclass(frozen=True)
class PseudorangeObservation:
    """One satellite's timing measurement.

    The measured travel time ``t_r - t_i`` is stored directly so the derived
    range keeps full precision for large time-of-week values.
    """

    prn_id: int
    receive_time_s: float
    travel_time_s: float
    correction_km: float = 0.0
    corrected: bool = False

    @classmethod
    def from_times(cls, prn_id: int, transmit_time_s: float, receive_time_s: float):
        if not receive_time_s > transmit_time_s:
            raise InvalidArgument("receive time must follow transmit time")
        return cls(prn_id, receive_time_s, receive_time_s - transmit_time_s)

    @property
    def transmit_time_s(self) -> float:
        return self.receive_time_s - self.travel_time_s

    @property
    def pseudorange_km(self) -> float:
        return self.travel_time_s * SPEED_OF_LIGHT_KM_S + self.correction_km

    @property
    def plausible(self) -> bool:
        return 15000.0 <= self.pseudorange_km <= 40000.0


def _rotate(v: np.ndarray, axis: np.ndarray, angle: float) -> np.ndarray:
    k = axis / np.linalg.norm(axis)
    c, s = math.cos(angle), math.sin(angle)
    return v * c + np.cross(k, v) * s + k * np.dot(k, v) * (1 - c)


def orbit_position(orbit: Orbit, t: float) -> np.ndarray:
    p = np.array(orbit.position_km)
    if orbit.mode == "static":
        return p
    center = np.array(orbit.center_km)
    angle = orbit.angular_rate_rad_s * (t - orbit.epoch_s)
    return center + _rotate(p - center, np.array(orbit.axis), angle)


def propagate(eph: Ephemeris, t: float, healthy: bool = True) -> SatelliteState:
    age = t - eph.orbit.epoch_s
    if not 0.0 <= age <= eph.validity_span_s:
        raise StaleEphemerisError(
            f"PRN {eph.prn_id}: t={t} s outside ephemeris validity "
            f"[{eph.orbit.epoch_s}, {eph.orbit.epoch_s + eph.validity_span_s}]"
        )
    return SatelliteState(eph.prn_id, CartesianCoord.from_array(orbit_position(eph.orbit, t)),
                          eph.clock_offset_s, healthy)


def _rng(rng_seed) -> np.random.Generator:
    return np.random.default_rng(rng_seed)


def observe(receiver_truth: CartesianCoord, sat: SatelliteState, t: float, err: ErrorModel,
            rng_seed=None) -> PseudorangeObservation:
    """Synthesize the measurement a receiver at ``receiver_truth`` makes at true time ``t``.

    ``rng_seed`` may be an int, a SeedSequence or an existing Generator.
    """
    if not sat.healthy:
        raise ExcludedSatelliteError(f"PRN {sat.prn_id} is unhealthy")
    c = SPEED_OF_LIGHT_KM_S
    geometric = receiver_truth.distance_to(sat.position)
    noise_km = 0.0
    if err.receiver_noise_sigma_km > 0:
        noise_km = float(_rng(rng_seed).normal(0.0, err.receiver_noise_sigma_km))
    travel = geometric / c + err.receiver_clock_bias_s + err.iono_for(sat.prn_id) + noise_km / c
    return PseudorangeObservation(sat.prn_id, t + err.receiver_clock_bias_s, travel)


def observe_all(receiver_truth: CartesianCoord, sats, t: float, err: ErrorModel,
                rng) -> list[PseudorangeObservation]:
    """Vectorized :func:`observe` over healthy satellites, one draw per satellite."""
    rng = _rng(rng)
    sats = [s for s in sats if s.healthy]
    if not sats:
        return []
    c = SPEED_OF_LIGHT_KM_S
    pos = np.array([[s.position.x_km, s.position.y_km, s.position.z_km] for s in sats])
    geometric = np.linalg.norm(pos - receiver_truth.as_array(), axis=1)
    if err.receiver_noise_sigma_km > 0:
        noise = rng.normal(0.0, err.receiver_noise_sigma_km, len(sats))
    else:
        noise = np.zeros(len(sats))
    iono = np.array([err.iono_for(s.prn_id) for s in sats])
    travel = geometric / c + err.receiver_clock_bias_s + iono + noise / c
    t_r = t + err.receiver_clock_bias_s
    return [PseudorangeObservation(s.prn_id, t_r, float(tt)) for s, tt in zip(sats, travel)]


def elevation_deg(receiver: CartesianCoord, sat_position: CartesianCoord, frame: Frame) -> float:
    d = sat_position.as_array() - receiver.as_array()
    up = up_vector(receiver, frame) if frame == "spherical" else np.array([0.0, 0.0, 1.0])
    return math.degrees(math.asin(np.clip(np.dot(d, up) / np.linalg.norm(d), -1.0, 1.0)))


def elevations_deg(receiver: CartesianCoord, sat_positions: np.ndarray, frame: Frame) -> np.ndarray:
    """Vectorized :func:`elevation_deg` over an ``(n, 3)`` array of positions."""
    d = np.asarray(sat_positions, dtype=float) - receiver.as_array()
    up = up_vector(receiver, frame)
    return np.degrees(np.arcsin(np.clip(d @ up / np.linalg.norm(d, axis=1), -1.0, 1.0)))


def visible_satellites(alm: Almanac, approx_pos: CartesianCoord, t: float, frame: Frame = "paper",
                       elevation_mask_deg: float = 0.0) -> list[int]:
    """Healthy almanac satellites whose elevation exceeds the mask.

    In the flat ``"paper"`` frame there is no horizon, so elevation is measured from the
    plane ``z = approx_pos.z``; a zero mask is the half-space test ``z_sat > z``.
    """
    if not alm.entries:
        raise InvalidArgument("empty almanac")
    out = []
    for prn, entry in sorted(alm.entries.items()):
        if not entry.healthy:
            continue
        pos = CartesianCoord.from_array(orbit_position(entry.orbit, t))
        if elevation_deg(approx_pos, pos, frame) > elevation_mask_deg:
            out.append(prn)
    return out


@dataclass
class Constellation:
    """Truth orbits for a scenario, shared read-only by every simulated receiver."""

    orbits: dict  # prn -> Orbit at t = 0
    clock_errors_s: dict = field(default_factory=dict)
    unhealthy: frozenset = frozenset()
    iono_model_delay_s: float = 0.0
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def prn_ids(self) -> list[int]:
        return sorted(self.orbits)

    def ephemeris(self, prn_id: int, t: float) -> Ephemeris:
        """The ephemeris broadcast at ``t``: issued on the last 2-hour boundary."""
        toe = math.floor(t / EPHEMERIS_UPDATE_S) * EPHEMERIS_UPDATE_S
        truth = self.orbits[prn_id]
        pos = orbit_position(truth, toe)
        orbit = Orbit(truth.mode, tuple(pos), toe, truth.angular_rate_rad_s, truth.axis, truth.center_km)
        return Ephemeris(prn_id, orbit, self.clock_errors_s.get(prn_id, 0.0), EPHEMERIS_VALIDITY_S)

    def states(self, t: float) -> list[SatelliteState]:
        if all(o.mode == "static" for o in self.orbits.values()):
            # Static satellites: every issue of the ephemeris gives the same states.
            if "static" not in self._cache:
                self._cache["static"] = [propagate(self.ephemeris(p, 0.0), 0.0, p not in self.unhealthy)
                                         for p in self.prn_ids]
            return list(self._cache["static"])
        return [propagate(self.ephemeris(p, t), t, p not in self.unhealthy) for p in self.prn_ids]

    def almanac(self) -> Almanac:
        entries = {p: AlmanacEntry(p, self.orbits[p], p not in self.unhealthy) for p in self.prn_ids}
        return Almanac(entries, self.iono_model_delay_s)
