"""MSB-first bit packing, fixed-point fields and CRC-16/CCITT."""

from __future__ import annotations

import binascii

import numpy as np

from .errors import CrcError, DecodingError, EncodingError

CRC16_POLY = 0x1021
CRC16_INIT = 0xFFFF


def crc16_ccitt(bits) -> int:
    """CRC-16/CCITT-FALSE over an arbitrary-length MSB-first bit sequence.

    Leading bits that do not fill a byte are shifted in one at a time, the
    byte-aligned remainder goes through ``binascii.crc_hqx``.
    """
    arr = np.asarray(bits, dtype=np.uint8)
    head = len(arr) % 8
    crc = CRC16_INIT
    for b in arr[:head]:
        top = ((crc >> 15) & 1) ^ int(b)
        crc = (crc << 1) & 0xFFFF
        if top:
            crc ^= CRC16_POLY
    return binascii.crc_hqx(np.packbits(arr[head:]).tobytes(), crc)


def to_fixed(value: float, lsb: float, nbits: int, signed: bool, name: str = "field") -> int:
    """Quantize ``value`` to an integer count of ``lsb`` that fits ``nbits``."""
    if not np.isfinite(value):
        raise EncodingError(f"{name}: non-finite value {value!r}")
    n = int(round(value / lsb))
    if signed:
        lo, hi = -(1 << (nbits - 1)), (1 << (nbits - 1)) - 1
    else:
        lo, hi = 0, (1 << nbits) - 1
    if not lo <= n <= hi:
        raise EncodingError(f"{name}: {value!r} outside the {nbits}-bit range")
    return n


def _int_to_bits(value: int, nbits: int) -> np.ndarray:
    if nbits == 0:
        return np.zeros(0, dtype=np.uint8)
    nbytes = (nbits + 7) // 8
    raw = np.frombuffer(value.to_bytes(nbytes, "big"), dtype=np.uint8)
    return np.unpackbits(raw)[nbytes * 8 - nbits:]


def _bits_to_int(bits: np.ndarray) -> int:
    n = len(bits)
    if n == 0:
        return 0
    pad = (-n) % 8
    packed = np.packbits(np.concatenate([np.zeros(pad, dtype=np.uint8), bits]))
    return int.from_bytes(packed.tobytes(), "big")


class BitWriter:
    def __init__(self):
        self._acc = 0
        self._n = 0

    def __len__(self):
        return self._n

    def uint(self, value: int, nbits: int, name: str = "field") -> "BitWriter":
        if value < 0 or value >= (1 << nbits):
            raise EncodingError(f"{name}: {value} does not fit {nbits} unsigned bits")
        self._acc = (self._acc << nbits) | value
        self._n += nbits
        return self

    def sint(self, value: int, nbits: int, name: str = "field") -> "BitWriter":
        if not -(1 << (nbits - 1)) <= value < (1 << (nbits - 1)):
            raise EncodingError(f"{name}: {value} does not fit {nbits} signed bits")
        return self.uint(value & ((1 << nbits) - 1), nbits, name)

    def fixed(self, value: float, lsb: float, nbits: int, signed: bool = True, name: str = "field"):
        n = to_fixed(value, lsb, nbits, signed, name)
        return self.sint(n, nbits, name) if signed else self.uint(n, nbits, name)

    def flag(self, value: bool) -> "BitWriter":
        return self.uint(1 if value else 0, 1)

    def pad_to(self, nbits: int, name: str = "section") -> "BitWriter":
        if self._n > nbits:
            raise EncodingError(f"{name}: {self._n} bits exceed the {nbits}-bit capacity")
        self._acc <<= nbits - self._n
        self._n = nbits
        return self

    def bits(self) -> np.ndarray:
        return _int_to_bits(self._acc, self._n)

    def append_crc(self) -> "BitWriter":
        return self.uint(crc16_ccitt(self.bits()), 16, "crc")


class BitReader:
    def __init__(self, bits):
        arr = np.asarray(bits, dtype=np.uint8)
        self._n = len(arr)
        self._acc = _bits_to_int(arr)
        self.pos = 0

    @property
    def remaining(self) -> int:
        return self._n - self.pos

    def uint(self, nbits: int) -> int:
        if self.pos + nbits > self._n:
            raise DecodingError("truncated bit stream")
        shift = self._n - self.pos - nbits
        self.pos += nbits
        return (self._acc >> shift) & ((1 << nbits) - 1)

    def sint(self, nbits: int) -> int:
        v = self.uint(nbits)
        if v >= 1 << (nbits - 1):
            v -= 1 << nbits
        return v

    def fixed(self, lsb: float, nbits: int, signed: bool = True) -> float:
        return (self.sint(nbits) if signed else self.uint(nbits)) * lsb

    def flag(self) -> bool:
        return bool(self.uint(1))


def check_crc(bits, what: str) -> None:
    """Raise CrcError unless the trailing 16 bits are the CRC of the rest."""
    arr = np.asarray(bits, dtype=np.uint8)
    if len(arr) < 16:
        raise DecodingError(f"{what}: too short for a CRC")
    want = _bits_to_int(arr[-16:])
    if crc16_ccitt(arr[:-16]) != want:
        raise CrcError(f"{what}: CRC mismatch")


def bits_to_bytes(bits) -> bytes:
    """Pack bits MSB-first, zero-padding the final byte."""
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def bytes_to_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8))
