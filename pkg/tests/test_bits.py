import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from laneavl.bits import BitReader, BitWriter, bits_to_bytes, bytes_to_bits, check_crc, crc16_ccitt
from laneavl.errors import CrcError, DecodingError, EncodingError


def reference_crc(bits):
    """Bit-serial CRC-16/CCITT-FALSE, written independently of the library."""
    crc = 0xFFFF
    for b in bits:
        msb = (crc >> 15) & 1
        crc = (crc << 1) & 0xFFFF
        if msb ^ int(b):
            crc ^= 0x1021
    return crc


def test_crc_check_value():
    # Catalogue check value for "123456789".
    assert crc16_ccitt(bytes_to_bits(b"123456789")) == 0x29B1


@given(st.lists(st.integers(0, 1), max_size=300))
def test_crc_matches_bit_serial_reference(bits):
    assert crc16_ccitt(np.array(bits, dtype=np.uint8)) == reference_crc(bits)


@given(st.lists(st.tuples(st.integers(1, 64), st.integers(0, 2**64 - 1)), min_size=1, max_size=20))
def test_writer_reader_round_trip(fields):
    w = BitWriter()
    vals = []
    for n, raw in fields:
        v = raw % (1 << n)
        w.uint(v, n)
        vals.append((n, v))
    r = BitReader(w.bits())
    assert [r.uint(n) for n, _ in vals] == [v for _, v in vals]
    assert r.remaining == 0


@given(st.integers(-(2**23), 2**23 - 1))
def test_signed_round_trip(v):
    assert BitReader(BitWriter().sint(v, 24).bits()).sint(24) == v


def test_msb_first_layout():
    assert BitWriter().uint(0b101, 3).uint(1, 1).bits().tolist() == [1, 0, 1, 1]
    assert bits_to_bytes([1, 0, 1]) == b"\xa0"


def test_range_errors():
    with pytest.raises(EncodingError):
        BitWriter().uint(8, 3)
    with pytest.raises(EncodingError):
        BitWriter().sint(-5, 3)
    with pytest.raises(EncodingError):
        BitWriter().fixed(1.0, 0.5, 2)
    with pytest.raises(EncodingError):
        BitWriter().uint(1, 10).pad_to(5)
    with pytest.raises(DecodingError):
        BitReader([1, 0]).uint(3)


def test_crc_detects_flip():
    w = BitWriter().uint(0xABCDE, 20).append_crc()
    bits = w.bits()
    check_crc(bits, "x")
    bits[3] ^= 1
    with pytest.raises(CrcError):
        check_crc(bits, "x")
