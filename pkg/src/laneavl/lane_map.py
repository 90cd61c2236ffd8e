"""Digital lane network: polyline lanes, polygon conversion, geometric queries
and the JSON network file.

Coordinates are 2-D kilometres in the flat map frame (x with latitude, y with
longitude). Lane widths are metres.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import InvalidArgument, InvalidPolygonError, SchemaError

FORMAT_VERSION = 1
SHAPE_DEVIATION_WARN_M = 0.25


def _as_points(points) -> np.ndarray:
    a = np.array(points, dtype=float)
    if a.ndim != 2 or a.shape[1] != 2:
        raise InvalidArgument(f"expected an (n, 2) point array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidArgument("non-finite coordinate")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LanePolyline:
    """A lane centreline ``A_0 ... A_n``; the end points are nodes, the rest shape points."""

    lane_id: str
    points: np.ndarray
    width_m: float = 3.6
    successors: tuple[str, ...] = ()
    predecessors: tuple[str, ...] = ()
    cumulative_km: np.ndarray = field(init=False, repr=False)
    _seg: np.ndarray = field(init=False, repr=False)
    _seg_len2: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = _as_points(self.points)
        if len(pts) < 2:
            raise InvalidArgument(f"lane {self.lane_id}: needs at least 2 points")
        seg = np.diff(pts, axis=0)
        steps = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(steps <= 0):
            raise InvalidArgument(f"lane {self.lane_id}: consecutive points coincide")
        if not self.width_m > 0:
            raise InvalidArgument(f"lane {self.lane_id}: width must be positive")
        cum = np.concatenate([[0.0], np.cumsum(steps)])
        cum.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "cumulative_km", cum)
        object.__setattr__(self, "_seg", seg)
        object.__setattr__(self, "_seg_len2", np.einsum("ij,ij->i", seg, seg))
        object.__setattr__(self, "successors", tuple(self.successors))
        object.__setattr__(self, "predecessors", tuple(self.predecessors))

    @property
    def length_km(self) -> float:
        return float(self.cumulative_km[-1])

    @property
    def width_km(self) -> float:
        return self.width_m / 1000.0

    def __eq__(self, other):
        if not isinstance(other, LanePolyline):
            return NotImplemented
        return (self.lane_id == other.lane_id and self.width_m == other.width_m
                and self.successors == other.successors and self.predecessors == other.predecessors
                and np.array_equal(self.points, other.points))

    def __hash__(self):
        return hash(self.lane_id)


@dataclass(frozen=True)
class Projection:
    foot: np.ndarray
    arc_length_km: float
    distance_km: float
    segment: int


def project_point(lane: LanePolyline, p) -> Projection:
    """Closest point on the lane to ``p``; the first segment wins exact ties."""
    p = np.asarray(p, dtype=float)[:2]
    a = lane.points[:-1]
    d = lane._seg
    seg_len2 = lane._seg_len2
    t = np.minimum(np.maximum(((p[0] - a[:, 0]) * d[:, 0] + (p[1] - a[:, 1]) * d[:, 1]) / seg_len2, 0.0), 1.0)
    feet = a + t[:, None] * d
    dist = np.hypot(feet[:, 0] - p[0], feet[:, 1] - p[1])
    k = int(np.argmin(dist))
    s = float(lane.cumulative_km[k] + t[k] * math.sqrt(seg_len2[k]))
    return Projection(feet[k], s, float(dist[k]), k)


def point_at_arclength(lane: LanePolyline, s_km: float) -> tuple[np.ndarray, bool]:
    """Point at arc length ``s_km``; beyond the end the last point is returned with ``True``."""
    if s_km < 0:
        raise InvalidArgument(f"negative arc length {s_km}")
    cum = lane.cumulative_km
    if s_km >= cum[-1]:
        return lane.points[-1].copy(), bool(s_km > cum[-1])
    k = int(np.searchsorted(cum, s_km, side="right")) - 1
    t = (s_km - cum[k]) / (cum[k + 1] - cum[k])
    return lane.points[k] + t * lane._seg[k], False


def points_at_arclengths(lane: LanePolyline, s_km) -> np.ndarray:
    """Vectorized :func:`point_at_arclength` for arc lengths within ``[0, length]``."""
    s = np.asarray(s_km, dtype=float)
    if np.any(s < 0) or np.any(s > lane.length_km):
        raise InvalidArgument("arc length outside the lane")
    cum = lane.cumulative_km
    k = np.minimum(np.searchsorted(cum, s, side="right") - 1, len(cum) - 2)
    t = (s - cum[k]) / (cum[k + 1] - cum[k])
    return lane.points[k] + t[:, None] * lane._seg[k]


# --------------------------------------------------------------------- polygons

def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = float((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        return (v > 0) - (v < 0)

    def on_seg(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and on_seg(p1, p2, q1)) or (o2 == 0 and on_seg(p1, p2, q2))
            or (o3 == 0 and on_seg(q1, q2, p1)) or (o4 == 0 and on_seg(q1, q2, p2)))


@dataclass(frozen=True, eq=False)
class LanePolygon:
    """Lane outline ``L_0 ... L_{n-1}``; closed unless ``closed=False``."""

    points: np.ndarray
    closed: bool = True

    def __post_init__(self):
        pts = _as_points(self.points)
        object.__setattr__(self, "points", pts)
        n = len(pts)
        if n < 4:
            raise InvalidPolygonError(f"polygon needs at least 4 points, got {n}")
        edges = [(i, (i + 1) % n) for i in range(n if self.closed else n - 1)]
        for i, j in edges:
            if np.array_equal(pts[i], pts[j]):
                raise InvalidPolygonError(f"repeated vertex at index {j}")
        for a in range(len(edges)):
            for b in range(a + 1, len(edges)):
                i1, j1 = edges[a]
                i2, j2 = edges[b]
                if len({i1, j1, i2, j2}) < 4:
                    continue  # adjacent edges share a vertex
                if _segments_cross(pts[i1], pts[j1], pts[i2], pts[j2]):
                    raise InvalidPolygonError(f"edges {a} and {b} intersect")


def polygon_to_polyline(poly: LanePolygon, lane_id: str = "polygon", width_m: float = 3.6,
                        successors=(), predecessors=()) -> LanePolyline:
    """Edge midpoints ``(L_k + L_{k+1}) / 2``, including the closing edge of a closed polygon."""
    pts = poly.points
    nxt = np.roll(pts, -1, axis=0) if poly.closed else pts[1:]
    base = pts if poly.closed else pts[:-1]
    return LanePolyline(lane_id, (base + nxt) / 2.0, width_m, successors, predecessors)


def shape_point_warnings(lane: LanePolyline, limit_m: float = SHAPE_DEVIATION_WARN_M) -> list[str]:
    """Chords whose deviation from the arc through neighbouring shape points exceeds ``limit_m``.

    The arc at each interior point is the circle through it and its two
    neighbours; the deviation of a chord is that circle's sagitta over it.
    """
    out = []
    pts = lane.points
    for k in range(1, len(pts) - 1):
        a, b, c = pts[k - 1], pts[k], pts[k + 1]
        ab, bc, ca = np.linalg.norm(b - a), np.linalg.norm(c - b), np.linalg.norm(a - c)
        cross = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        if cross == 0.0:
            continue
        radius = ab * bc * ca / (2.0 * cross)
        for chord, (i, j) in ((ab, (k - 1, k)), (bc, (k, k + 1))):
            sag_m = (radius - math.sqrt(max(radius ** 2 - (chord / 2) ** 2, 0.0))) * 1000.0
            if sag_m > limit_m:
                out.append(f"lane {lane.lane_id}: chord {i}-{j} deviates {sag_m:.3f} m from the arc")
    return out


# ---------------------------------------------------------------------- network

class LaneNetwork:
    """Immutable lane set with a uniform-grid segment index for radius queries."""

    def __init__(self, lanes, cell_km: float = 0.05):
        if not cell_km > 0:
            raise InvalidArgument("cell_km must be positive")
        self._lanes: dict[str, LanePolyline] = {}
        for lane in lanes:
            if lane.lane_id in self._lanes:
                raise InvalidArgument(f"duplicate lane_id {lane.lane_id!r}")
            self._lanes[lane.lane_id] = lane
        for lane in self._lanes.values():
            for ref in lane.successors + lane.predecessors:
                if ref not in self._lanes:
                    raise InvalidArgument(f"lane {lane.lane_id!r} references unknown lane {ref!r}")
        self.cell_km = cell_km
        grid = defaultdict(set)
        for lane in self._lanes.values():
            for a, b in zip(lane.points[:-1], lane.points[1:]):
                lo = np.floor(np.minimum(a, b) / cell_km).astype(int)
                hi = np.floor(np.maximum(a, b) / cell_km).astype(int)
                for i in range(lo[0], hi[0] + 1):
                    for j in range(lo[1], hi[1] + 1):
                        grid[(i, j)].add(lane.lane_id)
        self._grid = dict(grid)

    @property
    def lanes(self) -> list[LanePolyline]:
        return [self._lanes[k] for k in sorted(self._lanes)]

    @property
    def lane_ids(self) -> list[str]:
        return sorted(self._lanes)

    def __getitem__(self, lane_id: str) -> LanePolyline:
        return self._lanes[lane_id]

    def __contains__(self, lane_id) -> bool:
        return lane_id in self._lanes

    def __len__(self) -> int:
        return len(self._lanes)

    def __eq__(self, other):
        if not isinstance(other, LaneNetwork):
            return NotImplemented
        return self._lanes == other._lanes

    def nearby_lane_ids(self, p, d_km: float) -> set[str]:
        """Lanes with a segment in a grid cell within ``d_km`` of ``p`` (a superset)."""
        p = np.asarray(p, dtype=float)[:2]
        # One spare cell each side: a lane exactly d away may round into the neighbour.
        lo = np.floor((p - d_km) / self.cell_km).astype(int) - 1
        hi = np.floor((p + d_km) / self.cell_km).astype(int) + 1
        found = set()
        if (hi[0] - lo[0] + 1) * (hi[1] - lo[1] + 1) > len(self._grid):
            cells = (ids for key, ids in self._grid.items()
                     if lo[0] <= key[0] <= hi[0] and lo[1] <= key[1] <= hi[1])
        else:
            cells = (self._grid.get((i, j), ()) for i in range(lo[0], hi[0] + 1)
                     for j in range(lo[1], hi[1] + 1))
        for ids in cells:
            found.update(ids)
        return found


def candidate_lanes(network: LaneNetwork, p, d_km: float) -> list[str]:
    """Ids of lanes whose perpendicular distance to ``p`` is at most ``d_km``, sorted."""
    if not d_km > 0:
        raise InvalidArgument("d must be positive")
    return sorted(lid for lid in network.nearby_lane_ids(p, d_km)
                  if project_point(network[lid], p).distance_km <= d_km)


# ------------------------------------------------------------------------- file

class _LaneRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lane_id: str
    kind: Literal["polyline", "polygon"] = "polyline"
    points: list[tuple[float, float]] = Field(min_length=2)
    width_m: float = Field(default=3.6, gt=0)
    successors: list[str] = []
    predecessors: list[str] = []
    closed: bool = True

    @field_validator("lane_id", mode="before")
    @classmethod
    def _id_to_str(cls, v):
        return str(v) if isinstance(v, int) and not isinstance(v, bool) else v


class _TrackRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    t_s: list[float] = []
    points: list[tuple[float, float] | None]


class _NetworkFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: Literal[1] = 1
    units: Literal["km"] = "km"
    lanes: list[_LaneRecord]
    tracks: list[_TrackRecord] = []


@dataclass
class LoadReport:
    converted_polygons: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def _node_line(root, loc) -> int | None:
    """1-based line of the YAML/JSON node at pydantic location ``loc``."""
    node = root
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            match = [v for k, v in node.value if k.value == str(key)]
            if not match:
                break
            node = match[0]
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            break
    return node.start_mark.line + 1 if node is not None else None


def schema_error(exc: ValidationError, text: str, source: str) -> SchemaError:
    """Convert the first pydantic error into a SchemaError with field path and line."""
    err = exc.errors()[0]
    loc = tuple(err["loc"])
    path = ".".join(str(p) for p in loc)
    if err["type"] == "missing":
        # The line of the enclosing object is the useful one.
        line_loc = loc[:-1]
    else:
        line_loc = loc
    try:
        line = _node_line(yaml.compose(text), line_loc)
    except yaml.YAMLError:
        line = None
    return SchemaError(f"{err['msg']} (in {source})", path=path, line=line)


def parse_document(text: str, source: str):
    try:
        if source.endswith((".yaml", ".yml")):
            return yaml.safe_load(text)
        return json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        line = getattr(exc, "lineno", None)
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            line = mark.line + 1
        raise SchemaError(f"not a valid document ({source}): {exc}", path="", line=line) from None


def network_from_document(data, text: str = "", source: str = "<network>") -> tuple[LaneNetwork, LoadReport]:
    try:
        doc = _NetworkFile.model_validate(data)
    except ValidationError as exc:
        raise schema_error(exc, text, source) from None
    report = LoadReport()
    lanes = []
    for rec in doc.lanes:
        if rec.kind == "polygon":
            lane = polygon_to_polyline(LanePolygon(rec.points, rec.closed), rec.lane_id, rec.width_m,
                                       rec.successors, rec.predecessors)
            report.converted_polygons.append(rec.lane_id)
        else:
            lane = LanePolyline(rec.lane_id, rec.points, rec.width_m, rec.successors, rec.predecessors)
        lanes.append(lane)
        report.warnings.extend(shape_point_warnings(lane))
    try:
        return LaneNetwork(lanes), report
    except InvalidArgument as exc:
        raise SchemaError(f"{exc} (in {source})", path="lanes") from None


def load_network(path) -> tuple[LaneNetwork, LoadReport]:
    path = Path(path)
    text = path.read_text()
    return network_from_document(parse_document(text, str(path)), text, str(path))


def network_document(network: LaneNetwork, tracks=()) -> dict:
    """Plain-data form of ``network``; floats keep their shortest exact repr."""
    doc = {
        "version": FORMAT_VERSION,
        "units": "km",
        "lanes": [
            {
                "lane_id": lane.lane_id,
                "kind": "polyline",
                "points": [[float(x), float(y)] for x, y in lane.points],
                "width_m": lane.width_m,
                "successors": list(lane.successors),
                "predecessors": list(lane.predecessors),
            }
            for lane in network.lanes
        ],
    }
    if tracks:
        doc["tracks"] = list(tracks)
    return doc


def save_network(network: LaneNetwork, path, tracks=()) -> None:
    Path(path).write_text(json.dumps(network_document(network, tracks), indent=1) + "\n")
