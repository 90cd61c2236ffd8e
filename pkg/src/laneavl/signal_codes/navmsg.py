"""Navigation message frames, ephemeris/almanac records and the compact message.

A frame is 1500 bits sent at 50 bit/s (30 s). It has three sections:

=========  =========  ===============================================
bits       duration   content
=========  =========  ===============================================
0-299      6 s        clock data and the frame index
300-899    12 s       the transmitting satellite's ephemeris
900-1499   12 s       one of 25 almanac pages
=========  =========  ===============================================

Each section ends with its own CRC-16 and is zero padded. Field layouts are
documented in ``docs/wire-format.md``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from ..bits import BitReader, BitWriter, bits_to_bytes, bytes_to_bits, check_crc
from ..errors import DecodingError, EncodingError, InvalidArgument

FRAME_BITS = 1500
CLOCK_BITS = 300
EPHEMERIS_BITS = 600
ALMANAC_BITS = 600
CLOCK_END = CLOCK_BITS
EPHEMERIS_END = CLOCK_BITS + EPHEMERIS_BITS
FRAME_SECONDS = 30.0
ALMANAC_PAGES = 25
IONO_PAGE = ALMANAC_PAGES - 1
PREAMBLE = 0b10001011
MAX_PRN = 32

OrbitMode = Literal["static", "circular"]
_MODE_CODES = {"static": 0, "circular": 1}
_MODE_NAMES = {v: k for k, v in _MODE_CODES.items()}


@dataclass(frozen=True)
class Orbit:
    """Satellite motion record.

    ``static`` orbits stay at ``position_km``. ``circular`` orbits rotate
    ``position_km`` (the position at ``epoch_s``) about the line through
    ``center_km`` along ``axis`` at ``angular_rate_rad_s``.
    """

    mode: OrbitMode
    position_km: tuple[float, float, float]
    epoch_s: float = 0.0
    angular_rate_rad_s: float = 0.0
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    center_km: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.mode not in _MODE_CODES:
            raise InvalidArgument(f"unknown orbit mode {self.mode!r}")
        object.__setattr__(self, "position_km", tuple(float(v) for v in self.position_km))
        object.__setattr__(self, "axis", tuple(float(v) for v in self.axis))
        object.__setattr__(self, "center_km", tuple(float(v) for v in self.center_km))
        if self.mode == "circular" and not np.any(self.axis):
            raise InvalidArgument("circular orbit needs a non-zero axis")


@dataclass(frozen=True)
class Ephemeris:
    prn_id: int
    orbit: Orbit
    clock_offset_s: float = 0.0
    validity_span_s: float = 4 * 3600.0

    def __post_init__(self):
        if not 1 <= self.prn_id <= MAX_PRN:
            raise InvalidArgument(f"prn_id {self.prn_id} outside 1..{MAX_PRN}")
        if not self.validity_span_s > 0:
            raise InvalidArgument("validity_span_s must be positive")


@dataclass(frozen=True)
class AlmanacEntry:
    prn_id: int
    orbit: Orbit
    healthy: bool = True


@dataclass(frozen=True)
class Almanac:
    entries: dict = field(default_factory=dict)  # prn_id -> AlmanacEntry
    iono_delay_s: float = 0.0
    utc_offset_s: int = 0
    week: int = 0

    def __post_init__(self):
        for prn, entry in self.entries.items():
            if prn != entry.prn_id or not 1 <= prn <= MAX_PRN:
                raise InvalidArgument(f"bad almanac key {prn!r}")

    def covers(self, prn_ids) -> bool:
        return set(prn_ids) <= set(self.entries)


@dataclass(frozen=True)
class ClockData:
    prn_id: int
    week: int
    time_of_week_s: float
    clock_offset_s: float = 0.0
    clock_drift: float = 0.0
    healthy: bool = True


@dataclass(frozen=True)
class AlmanacPage:
    """One 1/25th slice of an almanac.

    Pages 0..23 carry the satellites ``page + 1`` and ``page + 25``; page 24
    carries the ionospheric model and time parameters.
    """

    page_index: int
    entries: tuple = ()
    iono_delay_s: float = 0.0
    utc_offset_s: int = 0
    week: int = 0


def page_prns(page_index: int) -> tuple[int, ...]:
    if page_index == IONO_PAGE:
        return ()
    return tuple(p for p in (page_index + 1, page_index + 25) if p <= MAX_PRN)


def _check_frame_index(frame_index: int) -> None:
    if not 0 <= frame_index < ALMANAC_PAGES:
        raise InvalidArgument(f"frame_index {frame_index} outside 0..{ALMANAC_PAGES - 1}")


def split_almanac(alm: Almanac) -> list[AlmanacPage]:
    pages = []
    for k in range(ALMANAC_PAGES):
        if k == IONO_PAGE:
            pages.append(AlmanacPage(k, (), alm.iono_delay_s, alm.utc_offset_s, alm.week))
        else:
            entries = tuple(alm.entries[p] for p in page_prns(k) if p in alm.entries)
            pages.append(AlmanacPage(k, entries))
    return pages


class AlmanacAssembler:
    """Collects almanac pages in any order until all 25 have been seen."""

    def __init__(self):
        self._pages: dict[int, AlmanacPage] = {}

    def add(self, page: AlmanacPage) -> bool:
        self._pages[page.page_index] = page
        return self.complete

    @property
    def complete(self) -> bool:
        return len(self._pages) == ALMANAC_PAGES

    @property
    def missing(self) -> list[int]:
        return [k for k in range(ALMANAC_PAGES) if k not in self._pages]

    def almanac(self) -> Almanac:
        if not self.complete:
            raise InvalidArgument(f"almanac incomplete, missing pages {self.missing}")
        entries = {}
        for page in self._pages.values():
            for e in page.entries:
                entries[e.prn_id] = e
        last = self._pages[IONO_PAGE]
        return Almanac(dict(sorted(entries.items())), last.iono_delay_s, last.utc_offset_s, last.week)


@dataclass(frozen=True, eq=False)
class NavFrame:
    bits: np.ndarray
    frame_index: int

    def __post_init__(self):
        if len(self.bits) != FRAME_BITS:
            raise InvalidArgument(f"a frame has {FRAME_BITS} bits, got {len(self.bits)}")
        _check_frame_index(self.frame_index)

    @property
    def clock_section(self) -> np.ndarray:
        return self.bits[:CLOCK_END]

    @property
    def ephemeris_section(self) -> np.ndarray:
        return self.bits[CLOCK_END:EPHEMERIS_END]

    @property
    def almanac_section(self) -> np.ndarray:
        return self.bits[EPHEMERIS_END:]

    def to_bytes(self) -> bytes:
        return bits_to_bytes(self.bits)

    @classmethod
    def from_bytes(cls, data: bytes) -> "NavFrame":
        bits = bytes_to_bits(data)[:FRAME_BITS]
        if len(bits) != FRAME_BITS:
            raise DecodingError("truncated frame")
        return cls(bits, _peek_frame_index(bits))

    def __eq__(self, other):
        return (isinstance(other, NavFrame) and self.frame_index == other.frame_index
                and np.array_equal(self.bits, other.bits))


# Field resolutions.
TOW_LSB = 2.0 ** -4
CLOCK_LSB = 2.0 ** -45
DRIFT_LSB = 2.0 ** -55
POS_LSB = 2.0 ** -20
RATE_LSB = 2.0 ** -43
AXIS_LSB = 2.0 ** -30
ALM_POS_LSB = 2.0 ** -4
ALM_RATE_LSB = 2.0 ** -35
ALM_AXIS_LSB = 2.0 ** -14
IONO_LSB = 2.0 ** -45


def _clock_section(clock: ClockData, frame_index: int) -> np.ndarray:
    w = BitWriter()
    w.uint(PREAMBLE, 8)
    w.uint(frame_index, 5, "frame_index")
    w.uint(clock.prn_id, 6, "prn_id")
    w.uint(clock.week, 10, "week")
    w.fixed(clock.time_of_week_s, TOW_LSB, 24, signed=False, name="time_of_week_s")
    w.flag(clock.healthy)
    w.fixed(clock.clock_offset_s, CLOCK_LSB, 40, name="clock_offset_s")
    w.fixed(clock.clock_drift, DRIFT_LSB, 24, name="clock_drift")
    w.append_crc()
    return w.pad_to(CLOCK_BITS, "clock section").bits()


def _write_orbit_fine(w: BitWriter, o: Orbit) -> None:
    w.uint(_MODE_CODES[o.mode], 2)
    w.fixed(o.epoch_s, TOW_LSB, 24, signed=False, name="epoch_s")
    for v in o.position_km:
        w.fixed(v, POS_LSB, 48, name="position_km")
    w.fixed(o.angular_rate_rad_s, RATE_LSB, 32, name="angular_rate_rad_s")
    for v in o.axis:
        w.fixed(v, AXIS_LSB, 32, name="axis")
    for v in o.center_km:
        w.fixed(v, POS_LSB, 48, name="center_km")


def _read_orbit_fine(r: BitReader) -> Orbit:
    mode = _read_mode(r)
    epoch = r.fixed(TOW_LSB, 24, signed=False)
    pos = tuple(r.fixed(POS_LSB, 48) for _ in range(3))
    rate = r.fixed(RATE_LSB, 32)
    axis = tuple(r.fixed(AXIS_LSB, 32) for _ in range(3))
    center = tuple(r.fixed(POS_LSB, 48) for _ in range(3))
    return Orbit(mode, pos, epoch, rate, axis, center)


def _write_orbit_coarse(w: BitWriter, o: Orbit) -> None:
    w.uint(_MODE_CODES[o.mode], 2)
    w.fixed(o.epoch_s, TOW_LSB, 24, signed=False, name="epoch_s")
    for v in o.position_km:
        w.fixed(v, ALM_POS_LSB, 28, name="position_km")
    w.fixed(o.angular_rate_rad_s, ALM_RATE_LSB, 24, name="angular_rate_rad_s")
    for v in o.axis:
        w.fixed(v, ALM_AXIS_LSB, 16, name="axis")
    for v in o.center_km:
        w.fixed(v, ALM_POS_LSB, 28, name="center_km")


def _read_orbit_coarse(r: BitReader) -> Orbit:
    mode = _read_mode(r)
    epoch = r.fixed(TOW_LSB, 24, signed=False)
    pos = tuple(r.fixed(ALM_POS_LSB, 28) for _ in range(3))
    rate = r.fixed(ALM_RATE_LSB, 24)
    axis = tuple(r.fixed(ALM_AXIS_LSB, 16) for _ in range(3))
    center = tuple(r.fixed(ALM_POS_LSB, 28) for _ in range(3))
    return Orbit(mode, pos, epoch, rate, axis, center)


def _read_mode(r: BitReader) -> str:
    code = r.uint(2)
    if code not in _MODE_NAMES:
        raise DecodingError(f"unknown orbit mode code {code}")
    return _MODE_NAMES[code]


def _ephemeris_section(eph: Ephemeris) -> np.ndarray:
    w = BitWriter()
    w.uint(eph.prn_id, 6, "prn_id")
    _write_orbit_fine(w, eph.orbit)
    w.fixed(eph.clock_offset_s, CLOCK_LSB, 40, name="clock_offset_s")
    w.fixed(eph.validity_span_s, 1.0, 20, signed=False, name="validity_span_s")
    w.append_crc()
    return w.pad_to(EPHEMERIS_BITS, "ephemeris section").bits()


def _almanac_section(page: AlmanacPage) -> np.ndarray:
    w = BitWriter()
    w.uint(page.page_index, 5, "page_index")
    if page.page_index == IONO_PAGE:
        w.fixed(page.iono_delay_s, IONO_LSB, 32, signed=False, name="iono_delay_s")
        w.sint(page.utc_offset_s, 8, "utc_offset_s")
        w.uint(page.week, 10, "week")
    else:
        allowed = page_prns(page.page_index)
        by_prn = {e.prn_id: e for e in page.entries}
        if not set(by_prn) <= set(allowed):
            raise EncodingError(f"page {page.page_index} carries only PRNs {allowed}")
        for slot in range(2):
            prn = allowed[slot] if slot < len(allowed) else 0
            entry = by_prn.get(prn)
            w.flag(entry is not None)
            w.uint(prn, 6)
            if entry is None:
                w.pad_to(len(w) + 1 + 2 + 24 + 84 + 24 + 48 + 84)
                continue
            w.flag(entry.healthy)
            _write_orbit_coarse(w, entry.orbit)
    w.append_crc()
    return w.pad_to(ALMANAC_BITS, "almanac section").bits()


def build_nav_frame(eph: Ephemeris, alm_slice: AlmanacPage, clock: ClockData, frame_index: int) -> NavFrame:
    _check_frame_index(frame_index)
    if alm_slice.page_index != frame_index:
        raise InvalidArgument(f"frame {frame_index} must carry almanac page {frame_index}")
    bits = np.concatenate([
        _clock_section(clock, frame_index),
        _ephemeris_section(eph),
        _almanac_section(alm_slice),
    ])
    return NavFrame(bits, frame_index)


def _section_reader(section: np.ndarray, used_bits: int, what: str) -> BitReader:
    check_crc(section[:used_bits], what)
    return BitReader(section[:used_bits - 16])


def _peek_frame_index(bits) -> int:
    r = BitReader(np.asarray(bits[:13], dtype=np.uint8))
    if r.uint(8) != PREAMBLE:
        raise DecodingError("missing frame preamble")
    return r.uint(5)


CLOCK_USED = 8 + 5 + 6 + 10 + 24 + 1 + 40 + 24 + 16
EPHEMERIS_USED = 6 + 2 + 24 + 144 + 32 + 96 + 144 + 40 + 20 + 16
_SLOT_BITS = 1 + 6 + 1 + 2 + 24 + 84 + 24 + 48 + 84
ALMANAC_USED = 5 + 2 * _SLOT_BITS + 16
IONO_USED = 5 + 32 + 8 + 10 + 16


def parse_nav_frame(bits) -> tuple[ClockData, Ephemeris, AlmanacPage, int]:
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1 or len(arr) != FRAME_BITS:
        raise DecodingError(f"a frame has exactly {FRAME_BITS} bits, got {arr.shape}")

    r = _section_reader(arr[:CLOCK_END], CLOCK_USED, "clock section")
    if r.uint(8) != PREAMBLE:
        raise DecodingError("missing frame preamble")
    frame_index = r.uint(5)
    if frame_index >= ALMANAC_PAGES:
        raise DecodingError(f"frame_index {frame_index} out of range")
    clock = ClockData(
        prn_id=r.uint(6),
        week=r.uint(10),
        time_of_week_s=r.fixed(TOW_LSB, 24, signed=False),
        healthy=r.flag(),
        clock_offset_s=r.fixed(CLOCK_LSB, 40),
        clock_drift=r.fixed(DRIFT_LSB, 24),
    )

    r = _section_reader(arr[CLOCK_END:EPHEMERIS_END], EPHEMERIS_USED, "ephemeris section")
    prn = r.uint(6)
    orbit = _read_orbit_fine(r)
    try:
        eph = Ephemeris(prn, orbit, r.fixed(CLOCK_LSB, 40), float(r.uint(20)))
    except InvalidArgument as exc:
        raise DecodingError(str(exc)) from exc

    section = arr[EPHEMERIS_END:]
    page_index = BitReader(section[:5]).uint(5)
    if page_index != frame_index:
        raise DecodingError(f"almanac page {page_index} in frame {frame_index}")
    if page_index == IONO_PAGE:
        r = _section_reader(section, IONO_USED, "almanac section")
        r.uint(5)
        page = AlmanacPage(page_index, (), r.fixed(IONO_LSB, 32, signed=False), r.sint(8), r.uint(10))
    else:
        r = _section_reader(section, ALMANAC_USED, "almanac section")
        r.uint(5)
        entries = []
        for _ in range(2):
            present = r.flag()
            prn = r.uint(6)
            healthy = r.flag()
            if present:
                entries.append(AlmanacEntry(prn, _read_orbit_coarse(r), healthy))
            else:
                r.uint(2 + 24 + 84 + 24 + 48 + 84)
        page = AlmanacPage(page_index, tuple(entries))
    return clock, eph, page, frame_index


# ---------------------------------------------------------------- compact message

COMPACT_BITS = 86
COMPACT_TIME_LSB = 2.0 ** -20


@dataclass(frozen=True, eq=False)
class CompactMessage:
    """Satellite id plus transmit time; orbits are assumed known in advance.

    Layout: prn (6) | transmit time, unsigned 64-bit count of 2^-20 s | CRC-16.
    """

    prn_id: int
    transmit_time_s: float
    bits: np.ndarray

    @property
    def crc(self) -> int:
        return int(BitReader(self.bits[-16:]).uint(16))

    def __eq__(self, other):
        return (isinstance(other, CompactMessage) and self.prn_id == other.prn_id
                and self.transmit_time_s == other.transmit_time_s
                and np.array_equal(self.bits, other.bits))


def build_compact_message(prn_id: int, transmit_time_s: float) -> CompactMessage:
    if not 1 <= prn_id <= MAX_PRN:
        raise InvalidArgument(f"prn_id {prn_id} outside 1..{MAX_PRN}")
    w = BitWriter()
    w.uint(prn_id, 6, "prn_id")
    w.fixed(transmit_time_s, COMPACT_TIME_LSB, 64, signed=False, name="transmit_time_s")
    w.append_crc()
    bits = w.bits()
    t = BitReader(bits[6:70]).uint(64) * COMPACT_TIME_LSB
    return CompactMessage(prn_id, t, bits)


def parse_compact_message(bits) -> CompactMessage:
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1 or len(arr) != COMPACT_BITS:
        raise DecodingError(f"a compact message has {COMPACT_BITS} bits, got {arr.shape}")
    check_crc(arr, "compact message")
    r = BitReader(arr)
    prn = r.uint(6)
    if not 1 <= prn <= MAX_PRN:
        raise DecodingError(f"prn_id {prn} outside 1..{MAX_PRN}")
    return CompactMessage(prn, r.uint(64) * COMPACT_TIME_LSB, arr.copy())
