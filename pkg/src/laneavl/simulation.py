"""End-to-end pipeline: satellites -> base/rover observations -> corrections over
the link -> position fixes -> lane matching, on one event-driven timeline."""

from __future__ import annotations

import heapq
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .constellation import ErrorModel, elevations_deg, observe_all
from .dgps import BaseStation, ChannelConfig, channel_send, decode, encode, apply_corrections
from .errors import LaneAvlError, ScenarioError
from .geodesy import frame_to_plane, horizontal_error_km
from .lane_map import LaneNetwork, load_network
from .lane_matcher import LaneMatcher
from .pnt_solver import SolverConfig, clock_bias_at_known_position, solve_iterative, solve_two_step
from .scenario import (
    Scenario,
    default_base_position,
    generate_truth,
    iono_delays_s,
    plane_point,
    validate_scenario,
)

log = logging.getLogger(__name__)

# Events at the same instant: deliveries first, then the fix epoch, then the
# base station's broadcast.
_DELIVER, _EPOCH, _EMIT = 0, 1, 2
CHANGE_MARGIN_S = 2.0


@dataclass(frozen=True)
class EpochRow:
    t_s: float
    status: str  # warmup | matched | unmatched
    truth_x_km: float
    truth_y_km: float
    truth_lane: str | None
    fix_x_km: float | None
    fix_y_km: float | None
    clock_bias_s: float | None
    corrected: bool
    matched_lane: str | None
    correct: bool | None
    near_change: bool
    latency_s: float | None
    error_m: float | None
    uncorrected_error_m: float | None
    corrected_error_m: float | None
    satellites: int


ROW_FIELDS = [f.name for f in fields(EpochRow)]


def _rms(values) -> float | None:
    values = list(values)
    if not values:
        return None
    return math.sqrt(math.fsum(v * v for v in values) / len(values))


def _pct(num: int, den: int) -> float | None:
    return 100.0 * num / den if den else None


def row_aggregates(rows) -> dict:
    """Aggregates that depend only on the per-epoch rows."""
    matched = [r for r in rows if r.status == "matched"]
    correct = sum(1 for r in matched if r.correct)
    scored = [r for r in matched if not r.near_change]
    scored_correct = sum(1 for r in scored if r.correct)
    latencies = [r.latency_s for r in rows if r.corrected and r.latency_s is not None]
    return {
        "epochs": len(rows),
        "warmup": sum(1 for r in rows if r.status == "warmup"),
        "matched": len(matched),
        "unmatched": sum(1 for r in rows if r.status == "unmatched"),
        "correct": correct,
        "lane_accuracy_pct": _pct(correct, len(matched)),
        "scored": len(scored),
        "scored_correct": scored_correct,
        "lane_accuracy_outside_changes_pct": _pct(scored_correct, len(scored)),
        "corrected_epochs": sum(1 for r in rows if r.corrected),
        "rms_horizontal_m": _rms(r.error_m for r in rows if r.error_m is not None),
        "rms_horizontal_uncorrected_m": _rms(
            r.uncorrected_error_m for r in rows if r.uncorrected_error_m is not None),
        "rms_horizontal_corrected_m": _rms(
            r.corrected_error_m for r in rows if r.corrected_error_m is not None),
        "mean_latency_s": math.fsum(latencies) / len(latencies) if latencies else None,
    }


@dataclass(frozen=True)
class LinkEvent:
    t_send: float
    t_arrive: float | None
    delay_s: float
    size_bytes: int


@dataclass
class RunReport:
    scenario: str
    seed: int
    dgps_enabled: bool
    rows: list[EpochRow] = field(default_factory=list)
    link: list[LinkEvent] = field(default_factory=list)
    truth_points: np.ndarray | None = None
    fix_points: list = field(default_factory=list)

    @property
    def aggregates(self) -> dict:
        agg = row_aggregates(self.rows)
        agg["corrections_sent"] = len(self.link)
        agg["corrections_lost"] = sum(1 for e in self.link if e.t_arrive is None)
        return agg

    def summary(self) -> dict:
        return {"scenario": self.scenario, "seed": self.seed, "dgps_enabled": self.dgps_enabled,
                **self.aggregates}

    def to_bytes(self) -> bytes:
        doc = {
            "summary": self.summary(),
            "rows": [asdict(r) for r in self.rows],
            "link": [asdict(e) for e in self.link],
        }
        return json.dumps(doc, sort_keys=True, allow_nan=False).encode()


def _solve(obs, states, cfg: SolverConfig, method: str, guess):
    if method == "four-sat-bias":
        return solve_two_step(obs[:4], states, cfg)
    return solve_iterative(obs, states, guess, cfg)


def _visible(receiver, states, sat_xyz, frame, mask_deg):
    elev = elevations_deg(receiver, sat_xyz, frame)
    return [st for st, e in zip(states, elev) if st.healthy and e > mask_deg]


def run_scenario(sc: Scenario, network: LaneNetwork | None = None) -> RunReport:
    """Simulate the scenario; the result depends only on the scenario (seed included)."""
    problems = [d for d in validate_scenario(sc) if d.level == "error"]
    if problems:
        raise ScenarioError(problems)
    if network is None:
        network, _ = load_network(sc.network_path)
    earth = sc.earth_model()
    frame = sc.frame
    constellation = sc.constellation.build(earth, frame)
    truth = generate_truth(sc, network)

    streams = np.random.SeedSequence(sc.seed).spawn(4)
    iono_rng, rover_rng, base_rng, link_rng = (np.random.default_rng(s) for s in streams)
    iono = iono_delays_s(sc, constellation.prn_ids, iono_rng)
    noise_km = sc.errors.receiver_noise_sigma_m / 1000.0

    solver_cfg = SolverConfig(sc.solver.earth_surface_tolerance_km, sc.solver.max_iterations,
                              sc.solver.convergence_km, sc.solver.degenerate_volume_threshold_km3,
                              frame, earth)
    channel = ChannelConfig(tuple(sc.channel.latency_s), sc.channel.loss_probability,
                            sc.channel.bandwidth_bps, sc.channel.correction_period_s)
    base_xy = (np.array(sc.dgps.base_position_km) if sc.dgps.base_position_km is not None
               else default_base_position(network))
    base_pos = plane_point(base_xy, earth, frame)
    base = BaseStation(base_pos, sc.dgps.station_id, sc.dgps.smoothing_epochs)
    matcher = LaneMatcher(network, sc.matcher.m, sc.matcher.d_m / 1000.0, sc.matcher.commit_epochs)
    mask = sc.constellation.elevation_mask_deg

    report = RunReport(sc.name, sc.seed, sc.dgps.enabled, truth_points=truth.points)
    queue: list = []
    seq = 0

    def schedule(t, kind, payload=None):
        nonlocal seq
        heapq.heappush(queue, (t, kind, seq, payload))
        seq += 1

    for k, t in enumerate(truth.times_s):
        schedule(float(t), _EPOCH, k)
    if sc.dgps.enabled:
        n_emit = int(math.floor(sc.duration_s / channel.correction_period_s - 1e-9)) + 1
        for j in range(n_emit):
            schedule(sc.start_time_s + j * channel.correction_period_s, _EMIT)

    latest = None  # (message, link delay)
    guess = None
    while queue:
        t, kind, _, payload = heapq.heappop(queue)
        if kind == _DELIVER:
            msg, delay = payload
            if latest is None or msg.epoch_time_s >= latest[0].epoch_time_s:
                latest = (msg, delay)
            continue
        if kind == _EMIT:
            wire = encode(base.emit(int(math.floor(t))))
            d = channel_send(wire, t, channel, link_rng)
            report.link.append(LinkEvent(t, d.t_arrive, d.delay_s, d.size_bytes))
            if not d.lost:
                schedule(d.t_arrive, _DELIVER, (decode(wire), d.delay_s))
            continue

        k = payload
        states = constellation.states(t)
        sat_xyz = np.array([st.position.as_array() for st in states])
        rover_xy = truth.points[k]
        rover_pos = plane_point(rover_xy, earth, frame)
        dt = t - sc.start_time_s
        rover_err = ErrorModel(iono, noise_km, sc.errors.rover_clock_bias_s + sc.errors.rover_clock_drift * dt)
        vis = _visible(rover_pos, states, sat_xyz, frame, mask)
        obs = observe_all(rover_pos, vis, t, rover_err, rover_rng)

        if sc.dgps.enabled:
            base_err = ErrorModel(iono, noise_km, sc.errors.base_clock_bias_s + sc.errors.base_clock_drift * dt)
            bvis = _visible(base_pos, states, sat_xyz, frame, mask)
            bobs = observe_all(base_pos, bvis, t, base_err, base_rng)
            if bobs:
                base.observe_epoch(bobs, bvis, clock_bias_at_known_position(bobs, bvis, base_pos))

        uncorrected = corrected = None
        latency = None
        try:
            uncorrected = _solve(obs, vis, solver_cfg, sc.solver.method, guess)
        except (LaneAvlError, np.linalg.LinAlgError) as exc:
            log.info("t=%.3f: uncorrected solve failed: %s", t, exc)
        if latest is not None:
            msg, delay = latest
            try:
                cobs = apply_corrections(obs, msg, sc.dgps.max_age_s, now_s=t)
            except LaneAvlError as exc:
                log.info("t=%.3f: %s", t, exc)
                cobs = []
            cobs = [o for o in cobs if o.corrected]
            if len(cobs) >= 4:
                try:
                    corrected = _solve(cobs, vis, solver_cfg, sc.solver.method, guess)
                    latency = delay
                except (LaneAvlError, np.linalg.LinAlgError) as exc:
                    log.info("t=%.3f: corrected solve failed: %s", t, exc)
        fix = corrected or uncorrected

        def herr(f):
            return None if f is None else horizontal_error_km(f.position, rover_pos, frame) * 1000.0

        record = None
        fix_xy = None
        if fix is not None:
            guess = fix.position
            fix_xy = frame_to_plane(fix.position, earth, frame)
            try:
                record = matcher.update(t, fix_xy)
            except LaneAvlError as exc:
                log.info("t=%.3f: matcher rejected fix: %s", t, exc)
        report.fix_points.append(fix_xy)

        if k < sc.matcher.m - 1:
            status = "warmup"
        elif record is not None and record.lane_id is not None:
            status = "matched"
        else:
            status = "unmatched"
        matched_lane = record.lane_id if record is not None else None
        report.rows.append(EpochRow(
            t_s=float(t),
            status=status,
            truth_x_km=float(rover_xy[0]),
            truth_y_km=float(rover_xy[1]),
            truth_lane=truth.lanes[k],
            fix_x_km=None if fix_xy is None else float(fix_xy[0]),
            fix_y_km=None if fix_xy is None else float(fix_xy[1]),
            clock_bias_s=None if fix is None else fix.clock_bias_s,
            corrected=corrected is not None,
            matched_lane=matched_lane if status == "matched" else None,
            correct=(matched_lane == truth.lanes[k]) if status == "matched" else None,
            near_change=truth.in_change_window(float(t), CHANGE_MARGIN_S),
            latency_s=latency,
            error_m=herr(fix),
            uncorrected_error_m=herr(uncorrected),
            corrected_error_m=herr(corrected),
            satellites=len(obs),
        ))
    return report
