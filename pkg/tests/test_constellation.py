import math

import numpy as np
import pytest

from laneavl.constellation import (
    Constellation,
    ErrorModel,
    PseudorangeObservation,
    elevation_deg,
    elevations_deg,
    observe,
    observe_all,
    propagate,
    visible_satellites,
)
from laneavl.errors import ExcludedSatelliteError, InvalidArgument, StaleEphemerisError
from laneavl.geodesy import SPEED_OF_LIGHT_KM_S, CartesianCoord
from laneavl.signal_codes import Almanac, AlmanacEntry, Ephemeris, Orbit

from conftest import sat

RX = CartesianCoord(100.0, -50.0, 0.0)


def test_static_propagation():
    eph = Ephemeris(3, Orbit("static", (1.0, 2.0, 20200.0)), 1e-7, 3600.0)
    for t in (0.0, 100.0, 3600.0):
        s = propagate(eph, t)
        assert s.position == CartesianCoord(1.0, 2.0, 20200.0)
        assert s.clock_error_s == 1e-7
    with pytest.raises(StaleEphemerisError):
        propagate(eph, 3600.5)
    with pytest.raises(StaleEphemerisError):
        propagate(eph, -1.0)


def test_circular_propagation():
    w = 1e-4
    period = 2 * math.pi / w
    orbit = Orbit("circular", (26000.0, 0.0, 0.0), 0.0, w, (0.0, 0.0, 1.0), (0.0, 0.0, 0.0))
    eph = Ephemeris(1, orbit, 0.0, float(2 ** 20 - 1))
    start = propagate(eph, 0.0).position.as_array()
    again = propagate(eph, period).position.as_array()
    np.testing.assert_allclose(again, start, atol=1e-8)
    # Quarter turn about +z takes (r, 0, 0) to (0, r, 0).
    quarter = propagate(eph, period / 4).position.as_array()
    np.testing.assert_allclose(quarter, [0.0, 26000.0, 0.0], atol=1e-8)


def test_observe_zero_error():
    s = sat(1, 3000.0, 4000.0, 20000.0)
    o = observe(RX, s, 1000.0, ErrorModel())
    assert o.pseudorange_km == pytest.approx(RX.distance_to(s.position), abs=1e-9)
    assert o.receive_time_s > o.transmit_time_s
    assert o.plausible


def test_observe_clock_bias_adds_c_times_b():
    s = sat(1, 3000.0, 4000.0, 20000.0)
    o = observe(RX, s, 1000.0, ErrorModel(receiver_clock_bias_s=1e-3))
    assert o.pseudorange_km - RX.distance_to(s.position) == pytest.approx(299.792458, abs=1e-9)


def test_common_iono_inflates_equally():
    sats = [sat(p, 1000.0 * p, -700.0 * p, 20000.0 + 10 * p) for p in range(1, 6)]
    plain = observe_all(RX, sats, 0.0, ErrorModel(), None)
    delayed = observe_all(RX, sats, 0.0, ErrorModel(iono_delay_s=40e-9), None)
    diffs = [d.pseudorange_km - p.pseudorange_km for p, d in zip(plain, delayed)]
    np.testing.assert_allclose(diffs, SPEED_OF_LIGHT_KM_S * 40e-9, atol=1e-9)


def test_unhealthy_excluded():
    with pytest.raises(ExcludedSatelliteError):
        observe(RX, sat(2, 0, 0, 20000, healthy=False), 0.0, ErrorModel())
    sats = [sat(1, 0, 0, 20000), sat(2, 0, 0, 21000, healthy=False)]
    assert [o.prn_id for o in observe_all(RX, sats, 0.0, ErrorModel(), 1)] == [1]


def test_seeded_reproducibility():
    s = sat(1, 3000.0, 4000.0, 20000.0)
    err = ErrorModel(receiver_noise_sigma_km=0.002)
    assert observe(RX, s, 5.0, err, 42) == observe(RX, s, 5.0, err, 42)
    sats = [sat(p, 100.0 * p, 0, 20000) for p in range(1, 9)]
    assert observe_all(RX, sats, 5.0, err, 9) == observe_all(RX, sats, 5.0, err, 9)


def test_noise_mean_within_three_standard_errors():
    s = sat(1, 3000.0, 4000.0, 20000.0)
    sigma = 0.002
    rng = np.random.default_rng(3)
    err = ErrorModel(receiver_noise_sigma_km=sigma)
    vals = np.array([observe(RX, s, 0.0, err, rng).pseudorange_km for _ in range(10000)])
    assert abs(vals.mean() - RX.distance_to(s.position)) < 3 * sigma / math.sqrt(10000)


def test_observation_invariants():
    with pytest.raises(InvalidArgument):
        PseudorangeObservation.from_times(1, 10.0, 10.0)
    with pytest.raises(InvalidArgument):
        ErrorModel(receiver_noise_sigma_km=-1.0)
    with pytest.raises(InvalidArgument):
        sat(1, 0, 0, 0, clock=0.02)
    assert not PseudorangeObservation(1, 1.0, 0.001).plausible


def test_visibility_half_space_oracle():
    heights = [20000, -5000, 3, -1, 25000, 0.5, -20000, 12000]
    alm = Almanac({p + 1: AlmanacEntry(p + 1, Orbit("static", (500.0 * p, -300.0 * p, float(h))))
                   for p, h in enumerate(heights)})
    origin = CartesianCoord(0.0, 0.0, 0.0)
    expected = [p + 1 for p, h in enumerate(heights) if h > 0]
    assert visible_satellites(alm, origin, 0.0) == expected


def test_visibility_health_and_empty():
    orbit = Orbit("static", (0.0, 0.0, 20000.0))
    alm = Almanac({1: AlmanacEntry(1, orbit), 2: AlmanacEntry(2, orbit, healthy=False)})
    assert visible_satellites(alm, RX, 0.0) == [1]
    with pytest.raises(InvalidArgument):
        visible_satellites(Almanac({}), RX, 0.0)


def test_vectorized_elevations_agree(rng):
    pts = rng.uniform(-20000, 20000, (20, 3))
    vec = elevations_deg(RX, pts, "paper")
    one = [elevation_deg(RX, CartesianCoord.from_array(p), "paper") for p in pts]
    np.testing.assert_allclose(vec, one, atol=1e-9)


def test_constellation_ephemeris_schedule():
    w = 1e-4
    orbit = Orbit("circular", (26000.0, 0.0, 0.0), 0.0, w, (0.0, 0.0, 1.0), (0.0, 0.0, 0.0))
    c = Constellation({1: orbit})
    eph = c.ephemeris(1, 7300.0)
    assert eph.orbit.epoch_s == 7200.0
    direct = propagate(Ephemeris(1, orbit, 0.0, 1e6), 7300.0).position.as_array()
    np.testing.assert_allclose(c.states(7300.0)[0].position.as_array(), direct, atol=1e-8)
    assert c.almanac().entries[1].orbit == orbit
