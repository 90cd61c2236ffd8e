"""Curve-to-curve lane matching over a sliding window of position fixes."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .lane_map import (
    LaneNetwork,
    LanePolyline,
    candidate_lanes,
    point_at_arclength,
    points_at_arclengths,
    project_point,
)


class TrajectoryWindow:
    """The last ``capacity`` planar fixes, oldest first."""

    def __init__(self, capacity: int = 10):
        if capacity < 2:
            raise InvalidArgument("window capacity must be >= 2")
        self.capacity = capacity
        self._times: deque[float] = deque(maxlen=capacity)
        self._points: deque[tuple[float, float]] = deque(maxlen=capacity)

    def push(self, t_s: float, point) -> "TrajectoryWindow":
        if self._times and not t_s > self._times[-1]:
            raise InvalidArgument(f"timestamp {t_s} not after {self._times[-1]}")
        self._times.append(float(t_s))
        self._points.append((float(point[0]), float(point[1])))
        return self

    def clear(self) -> None:
        self._times.clear()
        self._points.clear()

    @property
    def full(self) -> bool:
        return len(self._times) == self.capacity

    @property
    def times(self) -> np.ndarray:
        return np.array(self._times)

    @property
    def points(self) -> np.ndarray:
        return np.array(self._points, dtype=float).reshape(-1, 2)

    def __len__(self) -> int:
        return len(self._times)


def push_fix(window: TrajectoryWindow, t_s: float, point) -> TrajectoryWindow:
    return window.push(t_s, point)


@dataclass(frozen=True)
class CorrespondingSegment:
    lane_id: str
    points: np.ndarray
    start_arc_km: float
    overflow: bool = False
    missing_km: float = 0.0
    width_km: float = 0.0036


def _continuation(lane: LanePolyline, network: LaneNetwork | None) -> LanePolyline | None:
    if network is None or len(lane.successors) != 1:
        return None
    return network[lane.successors[0]]


def corresponding_segment(lane: LanePolyline, window, network: LaneNetwork | None = None) -> CorrespondingSegment:
    """March along ``lane`` mirroring the window's step lengths.

    The first point is the foot of the oldest fix. When the lane ends and the
    network gives it exactly one successor, the march carries on along the
    successor; otherwise the remaining points are pinned to the lane end and
    the shortfall is recorded in ``missing_km``.
    """
    pts = window.points if isinstance(window, TrajectoryWindow) else np.asarray(window, dtype=float)
    if len(pts) < 2:
        raise InvalidArgument("window needs at least 2 points")
    steps = np.hypot(*np.diff(pts, axis=0).T)
    start = project_point(lane, pts[0])
    targets = start.arc_length_km + np.cumsum(steps)
    if targets[-1] <= lane.length_km:
        out = np.vstack([start.foot, points_at_arclengths(lane, targets)])
        return CorrespondingSegment(lane.lane_id, out, start.arc_length_km, False, 0.0, lane.width_km)
    out = [start.foot]
    current, s = lane, start.arc_length_km
    overflow, missing = False, 0.0
    hops = 0
    for step in steps:
        s += step
        while s > current.length_km and not overflow:
            nxt = _continuation(current, network)
            if nxt is None or hops > 1000:
                overflow = True
                break
            s -= current.length_km
            current = nxt
            hops += 1
        if overflow:
            missing = s - current.length_km
            out.append(current.points[-1].copy())
        else:
            out.append(point_at_arclength(current, s)[0])
    return CorrespondingSegment(lane.lane_id, np.array(out), start.arc_length_km, overflow,
                                float(missing), lane.width_km)


def quad_areas(S: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Absolute shoelace area of each quadrilateral ``(P_k, P_k+1, l_k+1, l_k)``.

    Written as half the cross product of the diagonals, which needs only
    coordinate differences and so stays accurate far from the origin.
    """
    p0, p1, l1, l0 = S[:-1], S[1:], C[1:], C[:-1]
    ac = l1 - p0
    bd = l0 - p1
    return 0.5 * np.abs(ac[:, 0] * bd[:, 1] - ac[:, 1] * bd[:, 0])


def curve_distance(S, C: CorrespondingSegment | np.ndarray) -> float:
    """Summed per-step quadrilateral area between window ``S`` and segment ``C``, km^2.

    An overflowed segment adds ``width * missing length``.
    """
    S = S.points if isinstance(S, TrajectoryWindow) else np.asarray(S, dtype=float)
    seg = C if isinstance(C, CorrespondingSegment) else None
    Cp = seg.points if seg is not None else np.asarray(C, dtype=float)
    if S.shape != Cp.shape:
        raise InvalidArgument(f"window has {len(S)} points, segment has {len(Cp)}")
    area = float(np.sum(quad_areas(S, Cp)))
    if seg is not None and seg.overflow:
        area += seg.width_km * seg.missing_km
    return area


@dataclass(frozen=True)
class MatchResult:
    epoch: float | None
    lane_id: str | None
    distances: dict = field(default_factory=dict)
    margin: float = math.inf


def match_lane(window, network: LaneNetwork, d_km: float, previous_lane: str | None = None,
               epoch: float | None = None) -> MatchResult:
    """Pick the candidate lane with the smallest curve distance to the window.

    Candidates are lanes within ``d_km`` of the oldest window point. Exact
    ties go to ``previous_lane`` when it is tied, else to the lowest id.
    """
    pts = window.points if isinstance(window, TrajectoryWindow) else np.asarray(window, dtype=float)
    if isinstance(window, TrajectoryWindow) and not window.full:
        raise InvalidArgument("window is not full")
    cands = candidate_lanes(network, pts[0], d_km)
    if not cands:
        return MatchResult(epoch, None)
    distances = {lid: curve_distance(pts, corresponding_segment(network[lid], pts, network))
                 for lid in cands}
    best = min(distances.values())
    tied = [lid for lid in cands if distances[lid] == best]
    winner = previous_lane if previous_lane in tied else tied[0]
    others = sorted(v for lid, v in distances.items() if lid != winner)
    margin = others[0] - best if others else math.inf
    return MatchResult(epoch, winner, distances, margin)


@dataclass(frozen=True)
class MatchRecord:
    result: MatchResult
    lane_id: str | None


class LaneMatcher:
    """Window plus lane-switch smoothing for one vehicle.

    A new lane is only reported after ``commit_epochs`` consecutive raw
    matches agree on it.
    """

    def __init__(self, network: LaneNetwork, m: int = 10, d_km: float = 0.010, commit_epochs: int = 2):
        if commit_epochs < 1:
            raise InvalidArgument("commit_epochs must be >= 1")
        self.network = network
        self.window = TrajectoryWindow(m)
        self.d_km = d_km
        self.commit_epochs = commit_epochs
        self.lane: str | None = None
        self._pending: str | None = None
        self._pending_count = 0

    def update(self, t_s: float, point) -> MatchRecord | None:
        """Push a fix; ``None`` while the window is still filling."""
        self.window.push(t_s, point)
        if not self.window.full:
            return None
        res = match_lane(self.window, self.network, self.d_km, self.lane, t_s)
        if res.lane_id is None:
            self._pending, self._pending_count = None, 0
            return MatchRecord(res, None)
        if self.lane is None or res.lane_id == self.lane:
            self.lane = res.lane_id
            self._pending, self._pending_count = None, 0
        else:
            if res.lane_id == self._pending:
                self._pending_count += 1
            else:
                self._pending, self._pending_count = res.lane_id, 1
            if self._pending_count >= self.commit_epochs:
                self.lane = res.lane_id
                self._pending, self._pending_count = None, 0
        return MatchRecord(res, self.lane)
