"""Repetition, keyed randomization, and Gaussian-preserving sign modulation.

Bit convention: a positive latent value carries bit 1, a negative value bit 0,
and an exact zero is read as bit 0. Modulated values are signed half-normal
magnitudes, so with an unbiased keystream the marginal distribution of every
latent position is exactly standard normal.

Latent file format ("GSLT", version 1): a 16-byte header
``magic "GSLT" | u16 version | u16 C | u16 H | u16 W | 4 zero bytes``
(little-endian) followed by C*H*W float64 values, row-major in (c, h, w).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .bits import as_bits
from .errors import FormatError, LengthMismatch
from .mixing import mix64, stream_words

KEY_BYTES = 32
_MAGIC = b"GSLT"
_VERSION = 1
_HEADER = struct.Struct("<4sHHHH4x")


@dataclass(frozen=True)
class SecretKey:
    """32-byte watermarking key; the keystream is a pure function of it."""

    key_bytes: bytes

    def __post_init__(self):
        if not isinstance(self.key_bytes, bytes) or len(self.key_bytes) != KEY_BYTES:
            raise ValueError(f"key must be exactly {KEY_BYTES} bytes")

    @classmethod
    def from_hex(cls, text: str) -> "SecretKey":
        try:
            data = bytes.fromhex(text.strip())
        except ValueError as exc:
            raise FormatError("key must be a hex string") from exc
        if len(data) != KEY_BYTES:
            raise FormatError(f"key must be {2 * KEY_BYTES} hex chars")
        return cls(data)

    def to_hex(self) -> str:
        return self.key_bytes.hex()

    @classmethod
    def generate(cls, rng: np.random.Generator) -> "SecretKey":
        return cls(rng.bytes(KEY_BYTES))


@dataclass
class LatentTensor:
    """Flat view of a (channels, height, width) real tensor, row-major in (c, h, w)."""

    channels: int
    height: int
    width: int
    values: np.ndarray

    def __post_init__(self):
        if min(self.channels, self.height, self.width) <= 0:
            raise ValueError("all dimensions must be positive")
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.values.size != self.size:
            raise ValueError(
                f"value count {self.values.size} does not match shape "
                f"({self.channels},{self.height},{self.width})"
            )
        if not np.isfinite(self.values).all():
            raise ValueError("latent values must be finite")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.channels, self.height, self.width)

    @property
    def size(self) -> int:
        return self.channels * self.height * self.width


def _keystream_master(key: SecretKey) -> int:
    words = np.frombuffer(key.key_bytes, dtype="<u8")
    return mix64(*(int(w) for w in words))


def derive_keystream(key: SecretKey, length: int) -> np.ndarray:
    """Deterministic unbiased bit stream of the given length.

    Counter-mode over a split-mix 64-bit permutation: block i contributes the
    64 bits of ``finalize(master + (i+1)*GOLDEN)``, least-significant first,
    where ``master`` folds the four key words.
    """
    if length < 0:
        raise ValueError("length must be >= 0")
    if length == 0:
        return np.zeros(0, dtype=np.uint8)
    blocks = (length + 63) // 64
    words = stream_words(_keystream_master(key), blocks)
    bits = np.unpackbits(words.astype("<u8").view(np.uint8), bitorder="little")
    return bits[:length]


def repeat_expand(codeword: np.ndarray, copies: int) -> np.ndarray:
    """Block-ordered repetition: copy r occupies positions [r*n, (r+1)*n)."""
    codeword = as_bits(codeword)
    if copies < 1:
        raise ValueError("repetition count must be >= 1")
    return np.tile(codeword, copies)


def randomize(bits: np.ndarray, keystream: np.ndarray) -> np.ndarray:
    """Elementwise XOR with the keystream; self-inverse, so also derandomizes."""
    bits = as_bits(bits)
    keystream = as_bits(keystream)
    if bits.size != keystream.size:
        raise LengthMismatch(f"bits ({bits.size}) and keystream ({keystream.size}) differ")
    return bits ^ keystream


def sample_latent(
    signal: np.ndarray, shape: tuple[int, int, int], rng: np.random.Generator
) -> LatentTensor:
    """Draw the watermarked initial noise for a modulated bit signal.

    Each position gets an independent standard-normal magnitude; the signal
    bit selects the sign (bit 1 -> positive). With unbiased signal bits the
    output is i.i.d. standard normal.
    """
    signal = as_bits(signal)
    c, h, w = shape
    if signal.size != c * h * w:
        raise LengthMismatch(f"signal length {signal.size} != tensor size {c * h * w}")
    magnitudes = np.abs(rng.standard_normal(signal.size))
    values = np.where(signal == 1, magnitudes, -magnitudes)
    return LatentTensor(c, h, w, values)


def hard_bits(values: np.ndarray) -> np.ndarray:
    """Sign demodulation: positive -> 1, zero or negative -> 0."""
    return (np.asarray(values) > 0).astype(np.uint8)


def demodulate_soft(z: LatentTensor, keystream: np.ndarray) -> np.ndarray:
    """Derandomized soft values: y = (-1)^keystream * z, preserving magnitudes.

    The sign of each output encodes the derandomized bit (positive -> 1), so
    ``hard_bits(demodulate_soft(z, ks)) == randomize(hard_bits(z.values), ks)``
    away from exact zeros.
    """
    keystream = as_bits(keystream)
    if keystream.size != z.size:
        raise LengthMismatch(f"keystream ({keystream.size}) does not cover tensor ({z.size})")
    return np.where(keystream == 1, -z.values, z.values)


def write_latent(path, z: LatentTensor) -> None:
    header = _HEADER.pack(_MAGIC, _VERSION, z.channels, z.height, z.width)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(z.values.astype("<f8").tobytes())


def read_latent(path) -> LatentTensor:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError("latent file too short for header")
    magic, version, c, h, w = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {_MAGIC!r}")
    if version != _VERSION:
        raise FormatError(f"unsupported latent file version {version}")
    expected = _HEADER.size + c * h * w * 8
    if len(raw) != expected:
        raise FormatError(f"latent file size {len(raw)} != expected {expected}")
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).copy()
    try:
        return LatentTensor(c, h, w, values)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


__all__ = [
    "KEY_BYTES",
    "LatentTensor",
    "SecretKey",
    "demodulate_soft",
    "derive_keystream",
    "hard_bits",
    "randomize",
    "read_latent",
    "repeat_expand",
    "sample_latent",
    "write_latent",
]
