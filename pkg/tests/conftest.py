from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from laneavl.constellation import SatelliteState
from laneavl.geodesy import CartesianCoord

settings.register_profile("default", deadline=None)
settings.load_profile("default")

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"


def sat(prn, x, y, z, clock=0.0, healthy=True):
    return SatelliteState(prn, CartesianCoord(x, y, z), clock, healthy)


def random_geometry(rng, n=4, max_gdop=20.0):
    """Receiver on the flat-frame surface plus ``n`` satellites 20000 km up, GDOP-screened."""
    from laneavl.pnt_solver import pseudorange_jacobian

    while True:
        rx = np.array([rng.uniform(-3000, 3000), rng.uniform(-3000, 3000), 0.0])
        sats = rx + np.column_stack([
            rng.uniform(-12000, 12000, n),
            rng.uniform(-12000, 12000, n),
            rng.uniform(18000, 26000, n),
        ])
        if n < 4:
            return rx, sats
        H = pseudorange_jacobian(np.append(rx, 0.0), sats)
        try:
            gdop = np.sqrt(np.trace(np.linalg.inv(H.T @ H)))
        except np.linalg.LinAlgError:
            continue
        if gdop <= max_gdop:
            return rx, sats


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def scenario_data(**overrides):
    """A short stadium scenario as plain data; nested keys merge one level deep."""
    data = {
        "name": "short",
        "network": str(SCENARIOS / "stadium3.json"),
        "duration_s": 120,
        "seed": 3,
        "errors": {"iono_delay_ns": [20, 60], "receiver_noise_sigma_m": 2.0},
        "vehicle": {"mode": "lane-follow", "start_lane": "L2", "speed_mps": 15,
                    "lane_changes": [{"t_s": 40, "to_lane": "L3"}]},
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key] = {**data[key], **value}
        else:
            data[key] = value
    return data


@pytest.fixture
def make_scenario():
    from laneavl.scenario import parse_scenario

    def build(**overrides):
        return parse_scenario(scenario_data(**overrides))

    return build


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
