"""C/A Gold code generation and code-phase correlation.

Chips are stored as 0/1 ``uint8``. Correlation maps a chip ``c`` to the
bipolar value ``1 - 2c`` before multiplying.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import InvalidArgument, NoLockError

CODE_LENGTH = 1023
LOCK_THRESHOLD = 400

# G2 phase-selector tap pairs (1-based stage numbers) for PRN 1..32.
G2_TAPS = {
    1: (2, 6), 2: (3, 7), 3: (4, 8), 4: (5, 9), 5: (1, 9), 6: (2, 10),
    7: (1, 8), 8: (2, 9), 9: (3, 10), 10: (2, 3), 11: (3, 4), 12: (5, 6),
    13: (6, 7), 14: (7, 8), 15: (8, 9), 16: (9, 10), 17: (1, 4), 18: (2, 5),
    19: (3, 6), 20: (4, 7), 21: (5, 8), 22: (6, 9), 23: (1, 3), 24: (4, 6),
    25: (5, 7), 26: (6, 8), 27: (7, 9), 28: (8, 10), 29: (1, 6), 30: (2, 7),
    31: (3, 8), 32: (4, 9),
}


@dataclass(frozen=True, eq=False)
class PrnCode:
    prn_id: int
    chips: np.ndarray

    def __post_init__(self):
        if len(self.chips) != CODE_LENGTH:
            raise InvalidArgument(f"a C/A code has {CODE_LENGTH} chips, got {len(self.chips)}")

    @property
    def bipolar(self) -> np.ndarray:
        return 1 - 2 * self.chips.astype(np.int64)

    def __eq__(self, other):
        return (isinstance(other, PrnCode) and self.prn_id == other.prn_id
                and np.array_equal(self.chips, other.chips))

    def __hash__(self):
        return hash((self.prn_id, self.chips.tobytes()))


def _check_prn(prn_id) -> int:
    if isinstance(prn_id, bool) or not isinstance(prn_id, (int, np.integer)):
        raise InvalidArgument(f"prn_id must be an integer, got {prn_id!r}")
    if not 1 <= prn_id <= 32:
        raise InvalidArgument(f"prn_id {prn_id} outside 1..32")
    return int(prn_id)


@lru_cache(maxsize=None)
def _chips(prn_id: int) -> bytes:
    t1, t2 = G2_TAPS[prn_id]
    g1 = [1] * 10
    g2 = [1] * 10
    out = bytearray(CODE_LENGTH)
    for i in range(CODE_LENGTH):
        out[i] = g1[9] ^ g2[t1 - 1] ^ g2[t2 - 1]
        # G1 = 1 + x^3 + x^10, G2 = 1 + x^2 + x^3 + x^6 + x^8 + x^9 + x^10
        f1 = g1[2] ^ g1[9]
        f2 = g2[1] ^ g2[2] ^ g2[5] ^ g2[7] ^ g2[8] ^ g2[9]
        g1 = [f1] + g1[:9]
        g2 = [f2] + g2[:9]
    return bytes(out)


def generate_ca_code(prn_id: int) -> PrnCode:
    prn_id = _check_prn(prn_id)
    chips = np.frombuffer(_chips(prn_id), dtype=np.uint8).copy()
    chips.flags.writeable = False
    return PrnCode(prn_id, chips)


def _as_chips(received) -> np.ndarray:
    r = np.asarray(received)
    if r.ndim != 1 or len(r) < CODE_LENGTH:
        raise InvalidArgument(f"need at least {CODE_LENGTH} received chips, got {r.shape}")
    return r[:CODE_LENGTH].astype(np.int64)


def correlate(received, code: PrnCode, lag: int) -> int:
    """Sum of bipolar products of ``received[(k + lag) % 1023]`` and ``code[k]``."""
    r = 1 - 2 * _as_chips(received)
    idx = (np.arange(CODE_LENGTH) + int(lag)) % CODE_LENGTH
    return int(np.dot(r[idx], code.bipolar))


@lru_cache(maxsize=1)
def _code_spectra() -> np.ndarray:
    codes = np.stack([generate_ca_code(p).bipolar for p in range(1, 33)]).astype(float)
    return np.conj(np.fft.fft(codes, axis=1))


def correlate_all_lags(received, code: PrnCode) -> np.ndarray:
    """Circular correlation against ``code`` for every lag 0..1022."""
    r = (1 - 2 * _as_chips(received)).astype(float)
    spec = np.fft.fft(r) * np.conj(np.fft.fft(code.bipolar.astype(float)))
    return np.rint(np.fft.ifft(spec).real).astype(np.int64)


def identify_satellite(received, threshold: int = LOCK_THRESHOLD) -> tuple[int, int]:
    """Return the ``(prn_id, lag)`` with the strongest correlation peak.

    Ties resolve to the lowest PRN, then the lowest lag. Raises
    :class:`NoLockError` when the peak is below ``threshold``.
    """
    r = (1 - 2 * _as_chips(received)).astype(float)
    corr = np.rint(np.fft.ifft(np.fft.fft(r)[None, :] * _code_spectra(), axis=1).real)
    flat = int(np.argmax(corr))
    prn_idx, lag = divmod(flat, CODE_LENGTH)
    peak = int(corr[prn_idx, lag])
    if peak < threshold:
        raise NoLockError(f"correlation peak {peak} below threshold {threshold}", peak)
    return prn_idx + 1, lag
