"""Synthetic lane networks: parallel straight lanes and concentric stadium loops."""

from __future__ import annotations

import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .geodesy import DEFAULT_EARTH, GeodeticCoord, to_cartesian_paper
from .lane_map import LaneNetwork, LanePolyline


class NetworkSpec(BaseModel):
    """Parameters for :func:`generate_network`. Lengths in km unless suffixed ``_m``."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["stadium", "straight"] = "stadium"
    lanes: int = Field(3, ge=1, le=20)
    width_m: float = Field(3.6, gt=0)
    straight_km: float = Field(1.0, gt=0)
    radius_km: float = Field(0.2, gt=0)
    step_m: float = Field(5.0, gt=0)
    heading_deg: float = 0.0
    origin_lat_deg: float = 20.0
    origin_lon_deg: float = 40.0


def _stadium_path(straight: float, r: float, step: float) -> np.ndarray:
    n_line = max(1, math.ceil(straight / step))
    n_arc = max(2, math.ceil(math.pi * r / step))
    xs = np.linspace(0.0, straight, n_line + 1)[:-1]
    ang = np.linspace(-math.pi / 2, math.pi / 2, n_arc + 1)[:-1]
    parts = [
        np.column_stack([xs, np.full_like(xs, -r)]),
        np.column_stack([straight + r * np.cos(ang), r * np.sin(ang)]),
        np.column_stack([straight - xs, np.full_like(xs, r)]),
        np.column_stack([-r * np.cos(ang), -r * np.sin(ang)]),
    ]
    path = np.vstack(parts)
    return np.vstack([path, path[:1]])


def generate_network(spec: NetworkSpec) -> LaneNetwork:
    """Lanes ``L1 .. Ln``; ``L1`` is the innermost loop (stadium) or rightmost lane (straight).

    Stadium lanes are closed loops and list themselves as successor and
    predecessor, so a vehicle can circulate indefinitely.
    """
    origin = to_cartesian_paper(GeodeticCoord(spec.origin_lat_deg, spec.origin_lon_deg, 0.0), DEFAULT_EARTH)
    o = np.array([origin.x_km, origin.y_km])
    w = spec.width_m / 1000.0
    step = spec.step_m / 1000.0
    lanes = []
    for i in range(spec.lanes):
        lane_id = f"L{i + 1}"
        if spec.kind == "stadium":
            r = spec.radius_km + i * w
            pts = _stadium_path(spec.straight_km, r, step)
            links = (lane_id,)
        else:
            n = max(1, math.ceil(spec.straight_km / step))
            xs = np.linspace(0.0, spec.straight_km, n + 1)
            pts = np.column_stack([xs, np.full_like(xs, i * w)])
            links = ()
        h = math.radians(spec.heading_deg)
        rot = np.array([[math.cos(h), -math.sin(h)], [math.sin(h), math.cos(h)]])
        lanes.append(LanePolyline(lane_id, pts @ rot.T + o, spec.width_m, links, links))
    return LaneNetwork(lanes)
