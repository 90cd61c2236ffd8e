"""C/A codes, navigation message frames and the compact time message."""

from .gold import (
    CODE_LENGTH,
    LOCK_THRESHOLD,
    PrnCode,
    correlate,
    correlate_all_lags,
    generate_ca_code,
    identify_satellite,
)
from .navmsg import (
    ALMANAC_PAGES,
    COMPACT_BITS,
    FRAME_BITS,
    FRAME_SECONDS,
    Almanac,
    AlmanacAssembler,
    AlmanacEntry,
    AlmanacPage,
    ClockData,
    CompactMessage,
    Ephemeris,
    NavFrame,
    Orbit,
    build_compact_message,
    build_nav_frame,
    page_prns,
    parse_compact_message,
    parse_nav_frame,
    split_almanac,
)

__all__ = [
    "ALMANAC_PAGES", "CODE_LENGTH", "COMPACT_BITS", "FRAME_BITS", "FRAME_SECONDS",
    "LOCK_THRESHOLD", "Almanac", "AlmanacAssembler", "AlmanacEntry", "AlmanacPage",
    "ClockData", "CompactMessage", "Ephemeris", "NavFrame", "Orbit", "PrnCode",
    "build_compact_message", "build_nav_frame", "correlate", "correlate_all_lags",
    "generate_ca_code", "identify_satellite", "page_prns", "parse_compact_message",
    "parse_nav_frame", "split_almanac",
]
