"""Scenario documents: schema, loading, validation and the vehicle truth path."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .constellation import Constellation
from .errors import InvalidArgument, ScenarioError, SchemaError
from .geodesy import FRAMES, CartesianCoord, EarthModel, GeodeticCoord, geodetic_to_frame, inverse_paper
from .lane_map import LaneNetwork, load_network, parse_document, point_at_arclength, project_point, schema_error
from .signal_codes import Orbit


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class EarthConfig(_Model):
    radius_km: float = Field(6400.0, gt=0)


class SatelliteConfig(_Model):
    prn: int = Field(ge=1, le=32)
    lat_deg: float | None = Field(None, ge=-90, le=90)
    lon_deg: float | None = Field(None, ge=-180, le=180)
    height_km: float = 20200.0
    position_km: tuple[float, float, float] | None = None
    clock_error_s: float = 0.0
    mode: Literal["static", "circular"] = "static"
    angular_rate_rad_s: float = 0.0
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    center_km: tuple[float, float, float] = (0.0, 0.0, 0.0)
    healthy: bool = True

    @model_validator(mode="after")
    def _one_position(self):
        geodetic = self.lat_deg is not None and self.lon_deg is not None
        if geodetic == (self.position_km is not None):
            raise ValueError("give either lat_deg/lon_deg or position_km")
        return self


class ConstellationConfig(_Model):
    """``grid`` places satellites at every lat x lon pair; ``explicit`` lists them."""

    kind: Literal["grid", "explicit"] = "grid"
    lat_deg: list[float] = [-80.0, -40.0, 0.0, 40.0, 80.0]
    lon_deg: list[float] = [-50.0, -5.0, 40.0, 85.0, 130.0]
    height_km: float = 20200.0
    satellites: list[SatelliteConfig] = []
    elevation_mask_deg: float = 0.0

    def build(self, earth: EarthModel, frame: str) -> Constellation:
        sats = self.satellites
        if self.kind == "grid":
            sats = []
            pairs = [(la, lo) for la in self.lat_deg for lo in self.lon_deg]
            if len(pairs) > 32:
                raise InvalidArgument(f"grid gives {len(pairs)} satellites, at most 32 PRNs exist")
            for prn, (la, lo) in enumerate(pairs, start=1):
                sats.append(SatelliteConfig(prn=prn, lat_deg=la, lon_deg=lo, height_km=self.height_km))
        orbits, clocks, unhealthy = {}, {}, set()
        for s in sats:
            if s.position_km is not None:
                pos = tuple(s.position_km)
            else:
                pos = tuple(geodetic_to_frame(GeodeticCoord(s.lat_deg, s.lon_deg, s.height_km), earth,
                                              frame).as_array())
            orbits[s.prn] = Orbit(s.mode, pos, 0.0, s.angular_rate_rad_s, s.axis, s.center_km)
            clocks[s.prn] = s.clock_error_s
            if not s.healthy:
                unhealthy.add(s.prn)
        return Constellation(orbits, clocks, frozenset(unhealthy))


class ErrorConfig(_Model):
    """``iono_delay_ns`` is one delay for all satellites or ``[lo, hi]`` drawn per satellite."""

    iono_delay_ns: float | tuple[float, float] = 0.0
    receiver_noise_sigma_m: float = Field(0.0, ge=0)
    rover_clock_bias_s: float = 1e-4
    rover_clock_drift: float = 0.0
    base_clock_bias_s: float = -2e-4
    base_clock_drift: float = 0.0


class ChannelSection(_Model):
    latency_s: tuple[float, float] = (5.0, 10.0)
    loss_probability: float = Field(0.0, ge=0, le=1)
    bandwidth_bps: float = Field(20000.0, gt=0)
    correction_period_s: float = Field(30.0, gt=0)


class DgpsConfig(_Model):
    enabled: bool = True
    base_position_km: tuple[float, float] | None = None
    station_id: int = Field(1, ge=0, lt=4096)
    max_age_s: float = Field(45.0, gt=0)
    smoothing_epochs: int = Field(30, ge=1)


class SolverSection(_Model):
    method: Literal["iterative", "four-sat-bias"] = "iterative"
    earth_surface_tolerance_km: float = Field(1000.0, gt=0)
    max_iterations: int = Field(20, gt=0)
    convergence_km: float = Field(1e-9, gt=0)
    degenerate_volume_threshold_km3: float = Field(1.0, gt=0)


class MatcherConfig(_Model):
    m: int = 10
    d_m: float = 10.0
    commit_epochs: int = 2


class LaneChange(_Model):
    t_s: float = Field(ge=0)
    to_lane: str
    duration_s: float = Field(3.0, gt=0)


class Waypoint(_Model):
    x_km: float
    y_km: float
    speed_mps: float = Field(gt=0)


class VehicleConfig(_Model):
    mode: Literal["lane-follow", "waypoints"] = "lane-follow"
    start_lane: str | None = None
    start_offset_m: float = Field(0.0, ge=0)
    speed_mps: float = Field(15.0, ge=0)
    lane_changes: list[LaneChange] = []
    waypoints: list[Waypoint] = []


class Scenario(_Model):
    name: str = "scenario"
    frame: Literal["paper", "spherical"] = "paper"
    earth: EarthConfig = EarthConfig()
    constellation: ConstellationConfig = ConstellationConfig()
    errors: ErrorConfig = ErrorConfig()
    channel: ChannelSection = ChannelSection()
    dgps: DgpsConfig = DgpsConfig()
    solver: SolverSection = SolverSection()
    matcher: MatcherConfig = MatcherConfig()
    network: str
    vehicle: VehicleConfig = VehicleConfig()
    duration_s: float
    fix_rate_hz: float = 1.0
    start_time_s: float = Field(0.0, ge=0)
    seed: int = 0
    base_dir: str = Field(".", exclude=True)

    @property
    def network_path(self) -> Path:
        p = Path(self.network)
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def epoch_count(self) -> int:
        return int(round(self.duration_s * self.fix_rate_hz))

    def earth_model(self) -> EarthModel:
        return EarthModel(self.earth.radius_km)


@dataclass(frozen=True)
class Diagnostic:
    level: Literal["error", "warning"]
    path: str
    message: str

    def __str__(self):
        return f"{self.level}: {self.path or '<scenario>'}: {self.message}"


def parse_scenario(data, text: str = "", source: str = "<scenario>", base_dir=".") -> Scenario:
    if not isinstance(data, dict):
        raise SchemaError("scenario must be a mapping", path="")
    try:
        return Scenario.model_validate({**data, "base_dir": str(base_dir)})
    except ValidationError as exc:
        raise schema_error(exc, text, source) from None


def read_scenario(path) -> Scenario:
    """Parse a YAML or JSON scenario file without the semantic checks."""
    path = Path(path)
    text = path.read_text()
    return parse_scenario(parse_document(text, str(path)), text, str(path), path.parent)


def _receiver_plane_points(sc: Scenario, network: LaneNetwork) -> np.ndarray:
    if sc.vehicle.mode == "waypoints" and sc.vehicle.waypoints:
        return np.array([[w.x_km, w.y_km] for w in sc.vehicle.waypoints])
    return np.vstack([lane.points for lane in network.lanes])


def validate_scenario(sc: Scenario) -> list[Diagnostic]:
    """Semantic checks; the scenario is runnable iff no ``error`` diagnostics come back."""
    out: list[Diagnostic] = []

    def err(path, msg):
        out.append(Diagnostic("error", path, msg))

    if not sc.duration_s > 0:
        err("duration_s", "must be > 0")
    if not sc.fix_rate_hz > 0:
        err("fix_rate_hz", "must be > 0")
    if sc.matcher.m < 2:
        err("matcher.m", f"window size {sc.matcher.m} < 2")
    if not sc.matcher.d_m > 0:
        err("matcher.d_m", "must be > 0")
    if sc.matcher.commit_epochs < 1:
        err("matcher.commit_epochs", "must be >= 1")
    lo, hi = sc.channel.latency_s
    if not 0 <= lo <= hi:
        err("channel.latency_s", f"bounds {lo}, {hi} must satisfy 0 <= lo <= hi")
    if isinstance(sc.errors.iono_delay_ns, tuple) and not 0 <= sc.errors.iono_delay_ns[0] <= sc.errors.iono_delay_ns[1]:
        err("errors.iono_delay_ns", "range must satisfy 0 <= lo <= hi")
    if sc.frame not in FRAMES:
        err("frame", f"unknown frame {sc.frame!r}")

    network = None
    if not sc.network_path.is_file():
        err("network", f"network file {str(sc.network_path)!r} not found")
    else:
        try:
            network, _ = load_network(sc.network_path)
        except (SchemaError, InvalidArgument, OSError) as exc:
            err("network", f"cannot load network: {exc}")

    v = sc.vehicle
    if network is not None:
        if v.mode == "lane-follow":
            if v.start_lane is None:
                err("vehicle.start_lane", "required in lane-follow mode")
            elif v.start_lane not in network:
                err("vehicle.start_lane", f"unknown lane {v.start_lane!r}")
            for i, ch in enumerate(v.lane_changes):
                if ch.to_lane not in network:
                    err(f"vehicle.lane_changes.{i}.to_lane", f"unknown lane {ch.to_lane!r}")
            times = [ch.t_s for ch in v.lane_changes]
            for i in range(1, len(times)):
                if times[i] < times[i - 1] + v.lane_changes[i - 1].duration_s:
                    err(f"vehicle.lane_changes.{i}.t_s", "overlaps the previous lane change")
        elif len(v.waypoints) < 2:
            err("vehicle.waypoints", "need at least 2 waypoints")

    try:
        earth = sc.earth_model()
        constellation = sc.constellation.build(earth, sc.frame)
    except (InvalidArgument, ValueError) as exc:
        err("constellation", str(exc))
        return out
    if network is not None and not any(d.level == "error" for d in out):
        pts = _receiver_plane_points(sc, network)
        ref = plane_point(pts.mean(axis=0), earth, sc.frame)
        visible = 0
        for st in constellation.states(sc.start_time_s):
            if sc.frame == "paper" and st.position.z_km <= ref.z_km:
                out.append(Diagnostic("warning", f"constellation.prn{st.prn_id}",
                                      "satellite is below the receiver in the flat frame"))
            elif st.healthy:
                visible += 1
        if visible < 4:
            err("constellation", f"only {visible} usable satellites, need 4")
    return out


def load_scenario(path) -> Scenario:
    """Read and validate; raises ScenarioError when any error diagnostic is found."""
    sc = read_scenario(path)
    diags = [d for d in validate_scenario(sc) if d.level == "error"]
    if diags:
        raise ScenarioError(diags)
    return sc


def plane_point(xy, earth: EarthModel, frame: str, height_km: float = 0.0) -> CartesianCoord:
    if frame == "paper":
        return CartesianCoord(float(xy[0]), float(xy[1]), height_km)
    g = inverse_paper(CartesianCoord(float(xy[0]), float(xy[1]), height_km), earth)
    return geodetic_to_frame(g, earth, frame)


# ------------------------------------------------------------------ truth path

@dataclass(frozen=True)
class TruthPath:
    times_s: np.ndarray
    points: np.ndarray  # (n, 2) plane km
    lanes: list  # lane id per epoch (None off-network)
    change_windows: list  # (t_start, t_end) per scripted change

    def in_change_window(self, t: float, margin_s: float) -> bool:
        return any(a - margin_s <= t <= b + margin_s for a, b in self.change_windows)


def _smoothstep(u: float) -> float:
    u = min(max(u, 0.0), 1.0)
    return u * u * (3.0 - 2.0 * u)


def _advance(network: LaneNetwork, lane_id: str, s: float, ds: float):
    s += ds
    lane = network[lane_id]
    hops = 0
    while s > lane.length_km and len(lane.successors) == 1 and hops < 1000:
        s -= lane.length_km
        lane = network[lane.successors[0]]
        hops += 1
    return lane.lane_id, min(s, lane.length_km)


def generate_truth(sc: Scenario, network: LaneNetwork) -> TruthPath:
    """Vehicle centreline positions at every fix epoch.

    In lane-follow mode the vehicle drives the lane at constant speed; a
    scripted change blends from the current lane to the target lane with a
    smoothstep S-curve, and the truth lane flips at the blend midpoint.
    """
    n = sc.epoch_count
    dt = 1.0 / sc.fix_rate_hz
    times = sc.start_time_s + np.arange(n) * dt
    v = sc.vehicle
    if v.mode == "waypoints":
        return _waypoint_truth(v, network, times)
    lane_id, s = _advance(network, v.start_lane, 0.0, v.start_offset_m / 1000.0)
    changes = sorted(v.lane_changes, key=lambda c: c.t_s)
    windows = [(sc.start_time_s + c.t_s, sc.start_time_s + c.t_s + c.duration_s) for c in changes]
    pts, lanes = np.empty((n, 2)), []
    ci = 0
    active = None
    ds = v.speed_mps * dt / 1000.0
    for k, t in enumerate(times):
        while active is None and ci < len(changes) and t >= windows[ci][0]:
            if t <= windows[ci][1]:
                active = ci
            else:
                lane_id, s = _finish_change(network, lane_id, s, changes[ci].to_lane)
                ci += 1
        p = point_at_arclength(network[lane_id], s)[0]
        truth_lane = lane_id
        if active is not None:
            t0, t1 = windows[active]
            u = (t - t0) / (t1 - t0)
            target = network[changes[active].to_lane]
            w = _smoothstep(u)
            p = (1.0 - w) * p + w * project_point(target, p).foot
            if u >= 0.5:
                truth_lane = target.lane_id
        pts[k] = p
        lanes.append(truth_lane)
        lane_id, s = _advance(network, lane_id, s, ds)
        if active is not None and t + dt > windows[active][1]:
            lane_id, s = _finish_change(network, lane_id, s, changes[active].to_lane)
            active = None
            ci += 1
    return TruthPath(times, pts, lanes, windows)


def _finish_change(network, lane_id, s, to_lane):
    p = point_at_arclength(network[lane_id], s)[0]
    return to_lane, project_point(network[to_lane], p).arc_length_km


def _waypoint_truth(v: VehicleConfig, network: LaneNetwork, times) -> TruthPath:
    wp = np.array([[w.x_km, w.y_km] for w in v.waypoints])
    seg = np.hypot(*np.diff(wp, axis=0).T)
    seg_t = seg * 1000.0 / np.array([w.speed_mps for w in v.waypoints[:-1]])
    t_nodes = times[0] + np.concatenate([[0.0], np.cumsum(seg_t)])
    x = np.interp(times, t_nodes, wp[:, 0])
    y = np.interp(times, t_nodes, wp[:, 1])
    pts = np.column_stack([x, y])
    lanes = []
    for p in pts:
        best = min(network.lanes, key=lambda ln: (project_point(ln, p).distance_km, ln.lane_id))
        on = project_point(best, p).distance_km <= best.width_km / 2
        lanes.append(best.lane_id if on else None)
    return TruthPath(times, pts, lanes, [])


def iono_delays_s(sc: Scenario, prns, rng: np.random.Generator) -> dict:
    cfg = sc.errors.iono_delay_ns
    if isinstance(cfg, tuple):
        lo, hi = cfg
        draws = rng.uniform(lo, hi, len(prns))
        return {p: float(d) * 1e-9 for p, d in zip(prns, draws)}
    return {p: float(cfg) * 1e-9 for p in prns}


def default_base_position(network: LaneNetwork) -> np.ndarray:
    pts = np.vstack([lane.points for lane in network.lanes])
    return (pts.min(axis=0) + pts.max(axis=0)) / 2.0


__all__ = [
    "Diagnostic", "Scenario", "TruthPath", "default_base_position", "generate_truth", "iono_delays_s",
    "load_scenario", "parse_scenario", "plane_point", "read_scenario", "validate_scenario",
]

