import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from laneavl.errors import InvalidArgument
from laneavl.geodesy import (
    DEFAULT_EARTH,
    CartesianCoord,
    EarthModel,
    GeodeticCoord,
    horizontal_error_km,
    inverse_paper,
    inverse_spherical,
    surface_distance_km,
    to_cartesian_paper,
    to_cartesian_spherical,
)

lat = st.floats(-90, 90, allow_nan=False)
lon = st.floats(-180, 180, allow_nan=False)
height = st.floats(-10, 40000, allow_nan=False)


def test_circumference_constants():
    # 2 * pi * 6400 = 40212.385...; quarter and half truncated to 10 m.
    assert DEFAULT_EARTH.circumference_km == pytest.approx(40212.385, abs=1e-3)
    assert DEFAULT_EARTH.quarter_circumference_km == 10053.09
    assert DEFAULT_EARTH.semi_circumference_km == 20106.19


def test_worked_example_reproduced():
    c = to_cartesian_paper(GeodeticCoord(49.6, 40.6, 27500))
    assert c.x_km == pytest.approx(5540.32, abs=0.05)
    assert c.y_km == pytest.approx(9070.12, abs=0.5)
    assert c.z_km == 27500
    # Frozen values of 49.6 * 10053.09 / 90 and 40.6 * 20106.19 / 90.
    assert c.x_km == pytest.approx(5540.36960, abs=1e-5)
    assert c.y_km == pytest.approx(9070.12571, abs=1e-5)


def test_origin_and_pole():
    assert to_cartesian_paper(GeodeticCoord(0, 0, 12.5)) == CartesianCoord(0, 0, 12.5)
    assert to_cartesian_paper(GeodeticCoord(90, 0, 0)).x_km == pytest.approx(10053.09, abs=0.01)


def test_inverse_of_worked_example():
    g = inverse_paper(CartesianCoord(5540.32, 9070.12, 27500))
    assert g.latitude_deg == pytest.approx(49.6, abs=1e-3)
    assert g.longitude_deg == pytest.approx(40.6, abs=1e-3)
    assert g.height_km == 27500


def test_spherical_examples():
    p = to_cartesian_spherical(GeodeticCoord(0, 0, 0))
    assert math.dist((p.x_km, p.y_km, p.z_km), (0, 0, 0)) == pytest.approx(6400)
    for lon_deg in (-170, 0, 33, 180):
        assert to_cartesian_spherical(GeodeticCoord(90, lon_deg, 0)) == CartesianCoord(0, 0, 6400)
    # Hand values: 6400 cos45 cos45 = 3200, 6400 sin45 = 3200 sqrt(2).
    q = to_cartesian_spherical(GeodeticCoord(45, 45, 0))
    assert q.x_km == pytest.approx(3200.0, abs=1e-9)
    assert q.y_km == pytest.approx(3200.0, abs=1e-9)
    assert q.z_km == pytest.approx(4525.483399593904, abs=1e-9)


@given(lat, lon, height)
def test_paper_round_trip(la, lo, h):
    g = inverse_paper(to_cartesian_paper(GeodeticCoord(la, lo, h)))
    assert g.latitude_deg == pytest.approx(la, abs=1e-9)
    assert g.longitude_deg == pytest.approx(lo, abs=1e-9)
    assert g.height_km == h


@given(st.floats(-10000, 10000), st.floats(-20000, 20000), height)
def test_cartesian_round_trip(x, y, h):
    c = CartesianCoord(x, y, h)
    back = to_cartesian_paper(inverse_paper(c))
    assert back.distance_to(c) <= 1e-9


@given(st.floats(0, 45, allow_nan=False))
def test_linear_in_latitude(la):
    double = to_cartesian_paper(GeodeticCoord(2 * la, 0)).x_km
    assert double == pytest.approx(2 * to_cartesian_paper(GeodeticCoord(la, 0)).x_km, rel=1e-12, abs=1e-12)


def test_constants_share_one_derivation():
    m = DEFAULT_EARTH
    assert m.km_per_deg_lat * 90 + m.km_per_deg_lat * 90 * 2 == pytest.approx(
        m.semi_circumference_km + m.quarter_circumference_km, abs=0.02)


@given(st.floats(-89, 89), lon, st.floats(0, 30000))
def test_spherical_round_trip(la, lo, h):
    g = inverse_spherical(to_cartesian_spherical(GeodeticCoord(la, lo, h)))
    assert g.latitude_deg == pytest.approx(la, abs=1e-9)
    assert g.height_km == pytest.approx(h, abs=1e-6)
    if abs(la) < 89:
        assert g.longitude_deg == pytest.approx(lo, abs=1e-9) or abs(abs(lo) - 180) < 1e-9


@pytest.mark.parametrize("bad", [(91, 0, 0), (0, 181, 0), (0, 0, -11)])
def test_invalid_geodetic(bad):
    with pytest.raises(InvalidArgument):
        GeodeticCoord(*bad)


def test_invalid_models():
    with pytest.raises(InvalidArgument):
        EarthModel(radius_km=0)
    with pytest.raises(InvalidArgument):
        CartesianCoord(math.nan, 0, 0)


def test_surface_and_horizontal_helpers():
    assert surface_distance_km(np.array([1.0, 2.0, -3.0]), DEFAULT_EARTH, "paper") == 3.0
    assert surface_distance_km(np.array([0.0, 0.0, 6500.0]), DEFAULT_EARTH, "spherical") == 100.0
    assert horizontal_error_km(CartesianCoord(3, 4, 10), CartesianCoord(0, 0, 0), "paper") == 5.0
    assert horizontal_error_km(CartesianCoord(0, 0, 6401), CartesianCoord(0, 0, 6400), "spherical") == 0.0
