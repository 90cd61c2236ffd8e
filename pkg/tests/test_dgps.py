import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from laneavl.constellation import ErrorModel, PseudorangeObservation, observe_all
from laneavl.dgps import (
    BaseStation,
    ChannelConfig,
    CorrectionMessage,
    apply_corrections,
    channel_send,
    compute_corrections,
    decode,
    encode,
    message_size_bytes,
)
from laneavl.errors import CrcError, DecodingError, EncodingError, InvalidArgument, StaleCorrectionError
from laneavl.geodesy import SPEED_OF_LIGHT_KM_S, CartesianCoord
from laneavl.pnt_solver import clock_bias_at_known_position

from conftest import sat

BASE = CartesianCoord(10.0, 20.0, 0.0)
SATS = [sat(p, 4000.0 * np.cos(p), 4000.0 * np.sin(p), 20000.0 + 100 * p) for p in range(1, 9)]

messages = st.builds(
    CorrectionMessage,
    st.integers(0, 2**32 - 1),
    st.integers(0, 4095),
    st.lists(st.tuples(st.integers(0, 63), st.integers(-(2**23), 2**23 - 1).map(lambda n: n * 0.125)),
             max_size=63).map(tuple),
)


def reference_layout(msg):
    """Field-by-field bit string, assembled without the library's writer."""
    s = f"{msg.epoch_time_s:032b}{msg.station_id:012b}{msg.count:06b}"
    for prn, corr in msg.entries:
        s += f"{prn:06b}{int(round(corr / 0.125)) & 0xFFFFFF:024b}"
    crc = 0xFFFF
    for ch in s:
        top = (crc >> 15) & 1
        crc = (crc << 1) & 0xFFFF
        if top ^ int(ch):
            crc ^= 0x1021
    s += f"{crc:016b}"
    s += "0" * (-len(s) % 8)
    return int(s, 2).to_bytes(len(s) // 8, "big")


@given(messages)
def test_round_trip_and_layout(msg):
    wire = encode(msg)
    assert wire == reference_layout(msg)
    assert decode(wire) == msg
    assert len(wire) == message_size_bytes(msg.count)


def test_one_satellite_message_is_12_bytes():
    msg = CorrectionMessage(100, 1, ((5, -3.25),))
    assert len(encode(msg)) == 12 == -(-(32 + 12 + 6 + 30 + 16) // 8)


def test_decode_errors():
    wire = bytearray(encode(CorrectionMessage(100, 1, ((5, -3.25), (9, 1.0)))))
    for bit in (0, 30, 70, 100):
        bad = bytearray(wire)
        bad[bit // 8] ^= 0x80 >> (bit % 8)
        with pytest.raises(CrcError):
            decode(bytes(bad))
    with pytest.raises(DecodingError):
        decode(bytes(wire[:-2]))
    with pytest.raises(DecodingError):
        decode(bytes(wire[:4]))
    with pytest.raises(DecodingError):
        decode(bytes(wire) + b"\x00")


def test_encode_range_errors():
    with pytest.raises(EncodingError):
        CorrectionMessage(0, 1, ((1, 2.0 ** 20),))
    with pytest.raises(EncodingError):
        CorrectionMessage(0, 4096)
    with pytest.raises(EncodingError):
        CorrectionMessage(-1, 0)
    base = CartesianCoord(0.0, 0.0, 0.0)
    far = [PseudorangeObservation(1, 1.0, 0.1)]
    with pytest.raises(EncodingError):
        compute_corrections(base, far, [sat(1, 0, 0, 20000)])


def test_zero_error_corrections_are_zero():
    obs = observe_all(BASE, SATS, 1000.0, ErrorModel(), None)
    msg = compute_corrections(BASE, obs, SATS, 3)
    assert [c for _, c in msg.entries] == [0.0] * 8
    assert msg.epoch_time_s == 1000 and msg.station_id == 3
    assert apply_corrections(obs, msg, now_s=1000.0) == [
        PseudorangeObservation(o.prn_id, o.receive_time_s, o.travel_time_s, 0.0, True) for o in obs]


def test_iono_on_one_satellite():
    d = 30e-9
    obs = observe_all(BASE, SATS, 0.0, ErrorModel(iono_delay_s={4: d}), None)
    msg = compute_corrections(BASE, obs, SATS)
    assert msg.correction_for(4) == pytest.approx(-SPEED_OF_LIGHT_KM_S * 1000 * d, abs=0.0625)
    assert all(c == 0.0 for p, c in msg.entries if p != 4)


def test_unknown_satellite_skipped():
    obs = observe_all(BASE, SATS, 0.0, ErrorModel(), None)
    msg = compute_corrections(BASE, obs, SATS[:6])
    assert msg.count == 6 and msg.skipped == 2
    with pytest.raises(InvalidArgument):
        compute_corrections(BASE, [], SATS)


def test_missing_correction_passes_through_uncorrected():
    obs = observe_all(BASE, SATS, 0.0, ErrorModel(), None)
    out = apply_corrections(obs, CorrectionMessage(0, 0, ((1, 2.5),)), now_s=0.0)
    assert out[0].corrected and out[0].pseudorange_km == pytest.approx(obs[0].pseudorange_km + 0.0025)
    assert not any(o.corrected for o in out[1:])
    assert [o.pseudorange_km for o in out[1:]] == [o.pseudorange_km for o in obs[1:]]


def test_stale_message_rejected():
    msg = CorrectionMessage(100, 0, ((1, 0.0),))
    apply_corrections([], msg, 30.0, now_s=130.0)
    with pytest.raises(StaleCorrectionError):
        apply_corrections([], msg, 30.0, now_s=131.0)


@given(st.floats(10e-9, 60e-9), st.floats(-1e-3, 1e-3), st.floats(-1e-3, 1e-3))
def test_common_mode_cancels(iono, base_bias, rover_bias):
    delays = {s.prn_id: iono * (1 + 0.1 * s.prn_id) for s in SATS}
    base_obs = observe_all(BASE, SATS, 50.0, ErrorModel(delays, 0.0, base_bias), None)
    rover = CartesianCoord(10.2, 19.7, 0.0)
    rover_obs = observe_all(rover, SATS, 50.0, ErrorModel(delays, 0.0, rover_bias), None)
    bias = clock_bias_at_known_position(base_obs, SATS, BASE)
    msg = compute_corrections(BASE, base_obs, SATS, clock_bias_s=bias, epoch_time_s=50)
    corrected = apply_corrections(rover_obs, msg, now_s=50.0)
    c = SPEED_OF_LIGHT_KM_S
    resid = [o.pseudorange_km - rover.distance_to(s.position) for o, s in zip(corrected, SATS)]
    # What remains is the rover's own clock term plus the mean iono absorbed
    # by the base's clock solution: common to all satellites.
    spread = (max(resid) - min(resid)) * 1000
    assert spread <= 0.125 + 1e-6
    assert np.mean(resid) == pytest.approx(c * (rover_bias + bias - base_bias), abs=1e-3)


def test_colocated_identical_errors():
    err = ErrorModel({s.prn_id: 20e-9 + 5e-9 * s.prn_id for s in SATS})
    obs = observe_all(BASE, SATS, 0.0, err, None)
    msg = compute_corrections(BASE, obs, SATS, epoch_time_s=0)
    for o, s in zip(apply_corrections(obs, msg, now_s=0.0), SATS):
        assert abs(o.pseudorange_km - BASE.distance_to(s.position)) * 1000 <= 0.0625 + 1e-9


def test_base_station_smooths_noise(rng):
    base = BaseStation(BASE, 7, smoothing_epochs=30)
    err = ErrorModel(40e-9, 0.002)
    for k in range(30):
        obs = observe_all(BASE, SATS, float(k), err, rng)
        base.observe_epoch(obs, SATS, clock_bias_at_known_position(obs, SATS, BASE))
    msg = base.emit(29)
    assert msg.station_id == 7 and msg.count == 8
    # Iono is common to all satellites, so the clock solution absorbs it and
    # the averaged corrections shrink toward zero as noise/sqrt(30).
    assert max(abs(c) for _, c in msg.entries) < 1.5
    with pytest.raises(InvalidArgument):
        BaseStation(BASE, smoothing_epochs=0)


def test_channel_zero_latency():
    msg = CorrectionMessage(0, 0, ((1, 0.0),))
    d = channel_send(msg, 100.0, ChannelConfig((0.0, 0.0)), 1)
    assert d.t_arrive == 100.0 + 12 * 8 / 20000
    assert channel_send(encode(msg), 100.0, ChannelConfig((0.0, 0.0)), 1) == d


def test_channel_loss_rates():
    msg = CorrectionMessage(0, 0, ())
    assert all(channel_send(msg, 0.0, ChannelConfig(loss_probability=1.0), s).lost for s in range(100))
    rng = np.random.default_rng(5)
    cfg = ChannelConfig(loss_probability=0.1)
    lost = sum(channel_send(msg, 0.0, cfg, rng).lost for _ in range(10000))
    assert abs(lost / 10000 - 0.1) <= 0.01


def test_channel_bounds_and_determinism():
    msg = CorrectionMessage(0, 0, ((1, 0.0), (2, 0.0)))
    cfg = ChannelConfig()
    tx = msg.size_bytes() * 8 / cfg.bandwidth_bps
    for seed in range(200):
        d = channel_send(msg, 10.0, cfg, seed)
        assert 10.0 + 5.0 + tx <= d.t_arrive <= 10.0 + 10.0 + tx
        assert d == channel_send(msg, 10.0, cfg, seed)
    # Constant latency keeps FIFO order.
    const = ChannelConfig((7.0, 7.0))
    arrivals = [channel_send(msg, t, const, t).t_arrive for t in range(0, 300, 30)]
    assert arrivals == sorted(arrivals)


@pytest.mark.parametrize("kw", [dict(latency_s=(5, 4)), dict(latency_s=(-1, 4)),
                                dict(loss_probability=1.5), dict(bandwidth_bps=0)])
def test_channel_config_invariants(kw):
    with pytest.raises(InvalidArgument):
        ChannelConfig(**kw)
