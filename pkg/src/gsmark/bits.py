"""Bit-array helpers.

Bit sequences are numpy ``uint8`` arrays of 0/1 values. Byte conversions are
big-endian within each byte (bit 0 of a sequence is the most significant bit
of the first byte), matching the packed-record and hex conventions used
throughout.
"""

from __future__ import annotations

import numpy as np

from .errors import FormatError


def as_bits(seq) -> np.ndarray:
    """Coerce a sequence to a uint8 bit array, validating values are 0/1."""
    arr = np.asarray(seq, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("bit sequence must be one-dimensional")
    if arr.size and arr.max() > 1:
        raise ValueError("bit sequence may contain only 0 and 1")
    return arr


def bits_from_bytes(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def bytes_from_bits(bits: np.ndarray) -> bytes:
    bits = as_bits(bits)
    if bits.size % 8:
        raise ValueError("bit length must be a multiple of 8")
    return np.packbits(bits).tobytes()


def hex_from_bits(bits: np.ndarray) -> str:
    return bytes_from_bits(bits).hex()


def bits_from_hex(text: str, expected_bits: int | None = None) -> np.ndarray:
    text = text.strip()
    try:
        data = bytes.fromhex(text)
    except ValueError as exc:
        raise FormatError(f"invalid hex string: {text!r}") from exc
    bits = bits_from_bytes(data)
    if expected_bits is not None and bits.size != expected_bits:
        raise FormatError(
            f"expected {expected_bits} bits ({expected_bits // 4} hex chars), got {bits.size}"
        )
    return bits


def random_bits(rng: np.random.Generator, length: int) -> np.ndarray:
    return rng.integers(0, 2, size=length, dtype=np.uint8)
