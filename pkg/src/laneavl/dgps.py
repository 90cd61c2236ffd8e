"""Differential corrections: base-station computation, wire codec, rover-side
application, and the delayed/lossy link that carries the messages.

Wire layout, MSB first::

    epoch_time_s   32  unsigned, seconds of week
    station_id     12  unsigned
    count           6  unsigned
    count x {
      prn           6  unsigned
      correction   24  signed, 0.125 m per count
    }
    crc            16  CRC-16/CCITT-FALSE over everything above

The bit string is zero-padded to a whole number of bytes.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field, replace

import numpy as np

from .bits import BitReader, BitWriter, bits_to_bytes, bytes_to_bits, check_crc
from .constellation import PseudorangeObservation
from .errors import DecodingError, EncodingError, InvalidArgument, StaleCorrectionError
from .geodesy import SPEED_OF_LIGHT_KM_S, CartesianCoord

log = logging.getLogger(__name__)

SECONDS_PER_WEEK = 604800
CORRECTION_LSB_M = 0.125
CORRECTION_BITS = 24
CORRECTION_SPAN_M = 2.0 ** 20
HEADER_BITS = 32 + 12 + 6
ENTRY_BITS = 6 + CORRECTION_BITS
CRC_BITS = 16
MAX_ENTRIES = 63


def message_size_bytes(count: int) -> int:
    return math.ceil((HEADER_BITS + ENTRY_BITS * count + CRC_BITS) / 8)


def quantize_correction(value_m: float) -> float:
    n = int(round(value_m / CORRECTION_LSB_M))
    if not -(1 << (CORRECTION_BITS - 1)) <= n < (1 << (CORRECTION_BITS - 1)):
        raise EncodingError(f"correction {value_m} m outside +/-2^20 m")
    return n * CORRECTION_LSB_M


@dataclass(frozen=True)
class CorrectionMessage:
    """Per-satellite pseudorange corrections, metres, on a 0.125 m grid.

    ``entries`` is a tuple of ``(prn, correction_m)``; adding the correction
    to a measured pseudorange removes the error seen at the base station.
    """

    epoch_time_s: int
    station_id: int
    entries: tuple = ()
    skipped: int = field(default=0, compare=False)

    def __post_init__(self):
        if not 0 <= self.epoch_time_s < 1 << 32:
            raise EncodingError(f"epoch_time_s {self.epoch_time_s} does not fit 32 bits")
        if not 0 <= self.station_id < 1 << 12:
            raise EncodingError(f"station_id {self.station_id} does not fit 12 bits")
        if len(self.entries) > MAX_ENTRIES:
            raise EncodingError(f"{len(self.entries)} entries exceed the 6-bit count")
        for prn, corr in self.entries:
            if not 0 <= prn < 64:
                raise EncodingError(f"prn {prn} does not fit 6 bits")
            quantize_correction(corr)

    @property
    def count(self) -> int:
        return len(self.entries)

    def correction_for(self, prn: int) -> float | None:
        for p, c in self.entries:
            if p == prn:
                return c
        return None

    def size_bytes(self) -> int:
        return message_size_bytes(self.count)


def compute_corrections(base_truth: CartesianCoord, obs, sats, station_id: int = 0,
                        epoch_time_s: int | None = None, clock_bias_s: float = 0.0) -> CorrectionMessage:
    """Corrections ``geometric range - (pseudorange - c * clock_bias)`` per satellite.

    ``clock_bias_s`` is the base receiver's own clock bias; it is removed so
    the corrections carry only satellite-specific errors.
    """
    if not obs:
        raise InvalidArgument("need at least one observation")
    by_prn = {s.prn_id: s for s in sats}
    entries = []
    skipped = 0
    c_bias_m = SPEED_OF_LIGHT_KM_S * clock_bias_s * 1000.0
    for o in obs:
        sat = by_prn.get(o.prn_id)
        if sat is None:
            skipped += 1
            continue
        geometric_m = base_truth.distance_to(sat.position) * 1000.0
        measured_m = o.pseudorange_km * 1000.0 - c_bias_m
        entries.append((o.prn_id, quantize_correction(geometric_m - measured_m)))
    if skipped:
        log.warning("skipped %d observation(s) for satellites without a state", skipped)
    if epoch_time_s is None:
        epoch_time_s = int(round(max(o.receive_time_s for o in obs) - clock_bias_s)) % SECONDS_PER_WEEK
    return CorrectionMessage(epoch_time_s, station_id, tuple(sorted(entries)), skipped)


def encode(msg: CorrectionMessage) -> bytes:
    w = BitWriter()
    w.uint(msg.epoch_time_s, 32, "epoch_time_s")
    w.uint(msg.station_id, 12, "station_id")
    w.uint(msg.count, 6, "count")
    for prn, corr in msg.entries:
        w.uint(prn, 6, "prn")
        w.fixed(corr, CORRECTION_LSB_M, CORRECTION_BITS, name="correction")
    w.append_crc()
    return bits_to_bytes(w.bits())


def decode(data: bytes) -> CorrectionMessage:
    bits = bytes_to_bits(data)
    if len(bits) < HEADER_BITS + CRC_BITS:
        raise DecodingError("truncated buffer: shorter than an empty message")
    count = BitReader(bits[HEADER_BITS - 6:HEADER_BITS]).uint(6)
    used = HEADER_BITS + ENTRY_BITS * count + CRC_BITS
    expected = math.ceil(used / 8)
    if len(data) < expected:
        raise DecodingError(f"truncated buffer: count {count} needs {expected} bytes, got {len(data)}")
    if len(data) > expected:
        raise DecodingError(f"count mismatch: count {count} implies {expected} bytes, got {len(data)}")
    check_crc(bits[:used], "correction message")
    if np.any(bits[used:]):
        raise DecodingError("non-zero padding bits")
    r = BitReader(bits[:used - CRC_BITS])
    epoch = r.uint(32)
    station = r.uint(12)
    r.uint(6)
    entries = tuple((r.uint(6), r.fixed(CORRECTION_LSB_M, CORRECTION_BITS)) for _ in range(count))
    return CorrectionMessage(epoch, station, entries)


def correction_age_s(msg: CorrectionMessage, now_s: float) -> float:
    return (now_s - msg.epoch_time_s) % SECONDS_PER_WEEK


def apply_corrections(obs, msg: CorrectionMessage, max_age_s: float = 30.0,
                      now_s: float | None = None) -> list[PseudorangeObservation]:
    """Add the message's corrections to matching observations.

    Observations without a correction pass through with ``corrected=False``.
    ``now_s`` defaults to the latest receive time among ``obs``.
    """
    if now_s is None:
        now_s = max(o.receive_time_s for o in obs) if obs else float(msg.epoch_time_s)
    age = correction_age_s(msg, now_s)
    if age > max_age_s:
        raise StaleCorrectionError(f"correction message is {age:.3f} s old (limit {max_age_s} s)")
    table = dict(msg.entries)
    out = []
    for o in obs:
        corr = table.get(o.prn_id)
        if corr is None:
            out.append(replace(o, corrected=False))
        else:
            out.append(replace(o, correction_km=o.correction_km + corr / 1000.0, corrected=True))
    return out


# ------------------------------------------------------------------ base station

class BaseStation:
    """Surveyed receiver that turns its own observations into corrections.

    Raw per-epoch corrections are averaged over the last ``smoothing_epochs``
    epochs before broadcast, which suppresses the base receiver's white noise
    while keeping slowly varying satellite errors.
    """

    def __init__(self, position: CartesianCoord, station_id: int = 0, smoothing_epochs: int = 1):
        if smoothing_epochs < 1:
            raise InvalidArgument("smoothing_epochs must be >= 1")
        self.position = position
        self.station_id = station_id
        self._history = defaultdict(lambda: deque(maxlen=smoothing_epochs))

    def observe_epoch(self, obs, sats, clock_bias_s: float) -> None:
        msg = compute_corrections(self.position, obs, sats, self.station_id, 0, clock_bias_s)
        seen = set()
        for prn, corr in msg.entries:
            self._history[prn].append(corr)
            seen.add(prn)
        for prn in list(self._history):
            if prn not in seen:
                del self._history[prn]

    def emit(self, epoch_time_s: int) -> CorrectionMessage:
        entries = tuple(
            (prn, quantize_correction(float(np.mean(h))))
            for prn, h in sorted(self._history.items()) if h
        )
        return CorrectionMessage(int(epoch_time_s) % SECONDS_PER_WEEK, self.station_id, entries)


# --------------------------------------------------------------------- channel

@dataclass(frozen=True)
class ChannelConfig:
    latency_s: tuple[float, float] = (5.0, 10.0)
    loss_probability: float = 0.0
    bandwidth_bps: float = 20000.0
    correction_period_s: float = 30.0

    def __post_init__(self):
        lo, hi = self.latency_s
        if not 0 <= lo <= hi:
            raise InvalidArgument(f"latency bounds {self.latency_s} must satisfy 0 <= lo <= hi")
        if not 0.0 <= self.loss_probability <= 1.0:
            raise InvalidArgument("loss_probability must lie in [0, 1]")
        if not self.bandwidth_bps > 0:
            raise InvalidArgument("bandwidth_bps must be positive")
        if not self.correction_period_s > 0:
            raise InvalidArgument("correction_period_s must be positive")


@dataclass(frozen=True)
class Delivery:
    t_send: float
    t_arrive: float | None
    propagation_s: float
    transmission_s: float
    size_bytes: int

    @property
    def lost(self) -> bool:
        return self.t_arrive is None

    @property
    def delay_s(self) -> float:
        return self.propagation_s + self.transmission_s


def channel_send(msg, t_send: float, cfg: ChannelConfig, rng_seed=None) -> Delivery:
    """One message through the link: loss draw, latency draw, serialization time.

    ``msg`` may be a CorrectionMessage or already-encoded bytes. Both random
    draws are always taken so the stream stays aligned whatever the outcome.
    """
    rng = np.random.default_rng(rng_seed)
    size = msg.size_bytes() if isinstance(msg, CorrectionMessage) else len(msg)
    lo, hi = cfg.latency_s
    u_loss = rng.random()
    latency = lo + (hi - lo) * rng.random()
    transmission = size * 8 / cfg.bandwidth_bps
    lost = u_loss < cfg.loss_probability
    t_arrive = None if lost else t_send + latency + transmission
    return Delivery(t_send, t_arrive, latency, transmission, size)
