"""Receiver position and clock bias from pseudoranges.

Every solver works on the sphere equations

    |p - s_i| = rho_i - c * b

where ``s_i`` is a satellite position, ``rho_i`` its pseudorange and ``b``
the receiver clock bias (receiver clock minus true time).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constellation import PseudorangeObservation, SatelliteState
from .errors import ConvergenceError, DegenerateGeometryError, InvalidArgument, NoSolutionError
from .geodesy import (
    DEFAULT_EARTH,
    SPEED_OF_LIGHT_KM_S,
    CartesianCoord,
    EarthModel,
    Frame,
    surface_distance_km,
)

C = SPEED_OF_LIGHT_KM_S


@dataclass(frozen=True)
class SolverConfig:
    earth_surface_tolerance_km: float = 1000.0
    max_iterations: int = 20
    convergence_km: float = 1e-9
    degenerate_volume_threshold_km3: float = 1.0
    frame: Frame = "paper"
    earth: EarthModel = field(default_factory=EarthModel)

    def __post_init__(self):
        for name in ("earth_surface_tolerance_km", "max_iterations", "convergence_km",
                     "degenerate_volume_threshold_km3"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be positive")


@dataclass(frozen=True)
class PositionFix:
    position: CartesianCoord
    clock_bias_s: float
    residual_km: float
    method: str
    satellites_used: tuple[int, ...]
    iterations: int = 0
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.residual_km >= 0:
            raise InvalidArgument("residual_km must be >= 0")
        need = 3 if self.method == "three-sphere" else 4
        if len(self.satellites_used) < need:
            raise InvalidArgument(f"{self.method} fix needs >= {need} satellites")


def _arrays(obs, sats):
    if len(obs) != len(sats):
        raise InvalidArgument("observations and satellite states differ in length")
    by_prn = {s.prn_id: s for s in sats}
    try:
        pos = np.array([by_prn[o.prn_id].position.as_array() for o in obs])
    except KeyError as exc:
        raise InvalidArgument(f"no satellite state for PRN {exc.args[0]}") from None
    rho = np.array([o.pseudorange_km for o in obs])
    return pos, rho, tuple(o.prn_id for o in obs)


def pseudorange_residuals(state, sat_positions, pseudoranges) -> np.ndarray:
    """``rho_i - (|p - s_i| + c b)`` for ``state = (x, y, z, c*b)`` in km."""
    state = np.asarray(state, dtype=float)
    ranges = np.linalg.norm(sat_positions - state[:3], axis=1)
    return pseudoranges - ranges - state[3]


def pseudorange_jacobian(state, sat_positions) -> np.ndarray:
    """Jacobian of the predicted pseudorange ``|p - s_i| + c b`` w.r.t. ``(x, y, z, c*b)``."""
    state = np.asarray(state, dtype=float)
    d = state[:3] - sat_positions
    ranges = np.linalg.norm(d, axis=1)
    return np.column_stack([d / ranges[:, None], np.ones(len(sat_positions))])


def _choose_root(a: np.ndarray, b: np.ndarray, cfg: SolverConfig):
    da = surface_distance_km(a, cfg.earth, cfg.frame)
    db = surface_distance_km(b, cfg.earth, cfg.frame)
    if da != db:
        return (a, b) if da < db else (b, a)
    # Exact tie: smaller z, then y, then x.
    key_a = (a[2], a[1], a[0])
    key_b = (b[2], b[1], b[0])
    return (a, b) if key_a <= key_b else (b, a)


def _sphere_intersection(s: np.ndarray, r: np.ndarray, cfg: SolverConfig):
    s1, s2, s3 = s
    volume = abs(np.linalg.det(s)) / 6.0
    area = 0.5 * np.linalg.norm(np.cross(s2 - s1, s3 - s1))
    # In the spherical frame a satellite plane through the Earth's centre mirrors
    # both roots to the same radius, so the near-surface choice would be arbitrary.
    if area == 0.0:
        raise DegenerateGeometryError("satellites are collinear")
    if volume < cfg.degenerate_volume_threshold_km3:
        raise DegenerateGeometryError(
            f"satellite plane nearly contains the frame origin (tetrahedron volume {volume:.3g} km^3)"
        )
    d = np.linalg.norm(s2 - s1)
    ex = (s2 - s1) / d
    i = float(np.dot(ex, s3 - s1))
    ey_raw = s3 - s1 - i * ex
    j = float(np.linalg.norm(ey_raw))
    if j <= 1e-12 * d:
        raise DegenerateGeometryError("satellites are collinear")
    ey = ey_raw / j
    ez = np.cross(ex, ey)
    x = (r[0] ** 2 - r[1] ** 2 + d ** 2) / (2 * d)
    y = (r[0] ** 2 - r[2] ** 2 + i ** 2 + j ** 2) / (2 * j) - i * x / j
    z2 = r[0] ** 2 - x ** 2 - y ** 2
    if z2 < 0:
        # Tolerate round-off for tangent spheres; otherwise the ranges disagree.
        if z2 > -1e-9 * r[0] ** 2:
            z2 = 0.0
        else:
            raise NoSolutionError("the three spheres have no common point",
                                  residual_km=math.sqrt(-z2))
    z = math.sqrt(z2)
    base = s1 + x * ex + y * ey
    return base + z * ez, base - z * ez


def solve_three_sphere(obs, sats, cfg: SolverConfig | None = None):
    """Intersect three range spheres and keep the root nearest the Earth's surface.

    The clock bias is taken as zero. Returns ``(fix, alternate)`` where
    ``alternate`` is the discarded root.
    """
    cfg = cfg or SolverConfig()
    if len(obs) != 3:
        raise InvalidArgument("solve_three_sphere needs exactly 3 observations")
    pos, rho, prns = _arrays(obs, sats)
    root_a, root_b = _sphere_intersection(pos, rho, cfg)
    chosen, other = _choose_root(root_a, root_b, cfg)
    residual = float(np.max(np.abs(np.linalg.norm(pos - chosen, axis=1) - rho)))
    flags = ()
    if surface_distance_km(chosen, cfg.earth, cfg.frame) > cfg.earth_surface_tolerance_km:
        flags = ("off-surface",)
    fix = PositionFix(CartesianCoord.from_array(chosen), 0.0, residual, "three-sphere", prns, 0, flags)
    return fix, CartesianCoord.from_array(other)


def estimate_clock_bias(fix: PositionFix, fourth_obs: PseudorangeObservation,
                        fourth_sat: SatelliteState) -> float:
    """Bias from the mismatch between the fourth range and the fix.

    ``b = (r4 - P4) / c`` with ``r4`` the measured fourth range and ``P4`` the
    distance from the fix to the fourth satellite. A positive value means the
    receiver clock must be advanced.
    """
    r4 = fourth_obs.pseudorange_km
    p4 = fix.position.distance_to(fourth_sat.position)
    return (r4 - p4) / C


def solve_two_step(obs, sats, cfg: SolverConfig | None = None, tol_s: float = 1e-15) -> PositionFix:
    """Three-sphere fix plus fourth-satellite bias, iterated until the bias settles.

    Each pass removes the current bias estimate from the first three ranges,
    re-intersects, and re-estimates the bias with the fourth satellite.
    Secant steps on the bias mismatch keep the iteration convergent for
    geometries where plain substitution would oscillate.
    """
    cfg = cfg or SolverConfig()
    if len(obs) != 4:
        raise InvalidArgument("solve_two_step needs exactly 4 observations")
    by_prn = {s.prn_id: s for s in sats}
    first, fourth = list(obs[:3]), obs[3]
    sat4 = by_prn[fourth.prn_id]
    first_sats = [by_prn[o.prn_id] for o in first]

    def mismatch(b):
        shifted = [PseudorangeObservation(o.prn_id, o.receive_time_s, o.travel_time_s - b,
                                          o.correction_km, o.corrected) for o in first]
        fix, _ = solve_three_sphere(shifted, first_sats, cfg)
        shifted4 = PseudorangeObservation(fourth.prn_id, fourth.receive_time_s,
                                          fourth.travel_time_s - b, fourth.correction_km)
        return estimate_clock_bias(fix, shifted4, sat4), fix

    b0 = 0.0
    g0, fix = mismatch(b0)
    b1 = g0
    it = 1
    while it < cfg.max_iterations:
        g1, fix = mismatch(b1)
        it += 1
        if abs(g1) * C < cfg.convergence_km or abs(b1 - b0) < tol_s:
            break
        if g1 == g0:
            break
        b0, b1, g0 = b1, b1 - g1 * (b1 - b0) / (g1 - g0), g1
    else:
        raise ConvergenceError(f"two-step bias iteration did not settle in {cfg.max_iterations} passes")
    pos, rho, prns = _arrays(obs, sats)
    state = np.append(fix.position.as_array(), b1 * C)
    residual = float(np.max(np.abs(pseudorange_residuals(state, pos, rho))))
    return PositionFix(fix.position, b1, residual, "four-sat-bias", prns, it, fix.flags)


def default_guess(sat_positions: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    """The surface point below the satellites' centroid."""
    centroid = sat_positions.mean(axis=0)
    if cfg.frame == "paper":
        return np.array([centroid[0], centroid[1], 0.0])
    return centroid / np.linalg.norm(centroid) * cfg.earth.radius_km


def solve_iterative(obs, sats, initial_guess: CartesianCoord | None = None,
                    cfg: SolverConfig | None = None, initial_bias_s: float = 0.0) -> PositionFix:
    """Gauss-Newton least squares over ``(x, y, z, b)``."""
    cfg = cfg or SolverConfig()
    if len(obs) < 4:
        raise InvalidArgument("solve_iterative needs at least 4 observations")
    pos, rho, prns = _arrays(obs, sats)
    guess = initial_guess.as_array() if initial_guess is not None else default_guess(pos, cfg)
    state = np.append(guess, initial_bias_s * C)
    for it in range(1, cfg.max_iterations + 1):
        H = pseudorange_jacobian(state, pos)
        resid = pseudorange_residuals(state, pos, rho)
        HtH = H.T @ H
        if it == 1 and np.linalg.cond(HtH) > 1e15:
            raise DegenerateGeometryError("singular normal matrix")
        try:
            step = np.linalg.solve(HtH, H.T @ resid)
        except np.linalg.LinAlgError:
            raise DegenerateGeometryError("singular normal matrix") from None
        state = state + step
        if not np.all(np.isfinite(state)) or np.linalg.norm(state[:3]) > 1e7:
            raise ConvergenceError("iteration diverged")
        if np.linalg.norm(step) < cfg.convergence_km:
            break
    else:
        raise ConvergenceError(f"no convergence after {cfg.max_iterations} iterations")
    residual = float(np.max(np.abs(pseudorange_residuals(state, pos, rho))))
    flags = ()
    if surface_distance_km(state[:3], cfg.earth, cfg.frame) > cfg.earth_surface_tolerance_km:
        flags = ("off-surface",)
    return PositionFix(CartesianCoord.from_array(state[:3]), float(state[3] / C), residual,
                       "iterative", prns, it, flags)


def clock_bias_at_known_position(obs, sats, position: CartesianCoord) -> float:
    """Least-squares receiver clock bias when the antenna position is surveyed."""
    pos, rho, _ = _arrays(obs, sats)
    ranges = np.linalg.norm(pos - position.as_array(), axis=1)
    return float(np.mean(rho - ranges) / C)


def fix_residuals_km(fix: PositionFix, obs, sats) -> np.ndarray:
    pos, rho, _ = _arrays(obs, sats)
    state = np.append(fix.position.as_array(), fix.clock_bias_s * C)
    return pseudorange_residuals(state, pos, rho)


__all__ = [
    "DEFAULT_EARTH", "PositionFix", "SolverConfig", "clock_bias_at_known_position",
    "estimate_clock_bias", "fix_residuals_km", "pseudorange_jacobian", "pseudorange_residuals",
    "solve_iterative", "solve_three_sphere", "solve_two_step",
]
