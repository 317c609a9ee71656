"""Structured rights record packed into the fixed-width watermark sequence.

Layout (big-endian fields, bit 0 = MSB of ``licensor_id``):

    licensor_id   64 bits
    licensee_id   64 bits
    timestamp     64 bits (seconds since epoch)
    permission_flags  32 bits (opaque bit set)
    checksum      32 bits, CRC-32 (reflected polynomial 0xEDB88320, as in zlib)
                  over the preceding 224 bits

Total is exactly ``PAYLOAD_BITS`` = 256 bits. The checksum is always derived
from the other four fields; it cannot be set independently.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from .bits import as_bits, bits_from_bytes, bytes_from_bits
from .errors import ChecksumMismatch, WrongLength

PAYLOAD_BITS = 256
_DATA_BYTES = 28  # 224 bits ahead of the CRC

_FIELD_WIDTHS = {
    "licensor_id": 64,
    "licensee_id": 64,
    "timestamp": 64,
    "permission_flags": 32,
}


@dataclass(frozen=True)
class WatermarkPayload:
    """Rights record carried by the watermark. ``checksum`` is derived, not set."""

    licensor_id: int
    licensee_id: int
    timestamp: int
    permission_flags: int
    checksum: int = field(init=False)

    def __post_init__(self):
        for name, width in _FIELD_WIDTHS.items():
            value = getattr(self, name)
            if not isinstance(value, int) or not (0 <= value < 1 << width):
                raise ValueError(f"{name} must be an unsigned {width}-bit integer")
        object.__setattr__(self, "checksum", zlib.crc32(self._data_bytes()))

    def _data_bytes(self) -> bytes:
        return (
            self.licensor_id.to_bytes(8, "big")
            + self.licensee_id.to_bytes(8, "big")
            + self.timestamp.to_bytes(8, "big")
            + self.permission_flags.to_bytes(4, "big")
        )

    def to_json_obj(self) -> dict:
        return {
            "licensor_id": self.licensor_id,
            "licensee_id": self.licensee_id,
            "timestamp": self.timestamp,
            "permission_flags": self.permission_flags,
            "checksum": self.checksum,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "WatermarkPayload":
        """Build a record from a JSON object with the five layout fields.

        ``checksum`` may be omitted; when present it must match the value
        recomputed from the other fields.
        """
        unknown = set(obj) - set(_FIELD_WIDTHS) - {"checksum"}
        if unknown:
            raise ValueError(f"unknown record fields: {sorted(unknown)}")
        missing = set(_FIELD_WIDTHS) - set(obj)
        if missing:
            raise ValueError(f"missing record fields: {sorted(missing)}")
        record = cls(**{name: obj[name] for name in _FIELD_WIDTHS})
        if "checksum" in obj and obj["checksum"] != record.checksum:
            raise ChecksumMismatch(
                f"provided checksum {obj['checksum']:#010x} does not match "
                f"recomputed {record.checksum:#010x}"
            )
        return record


def pack_record(record: WatermarkPayload) -> np.ndarray:
    """Pack a record into its 256-bit watermark sequence (CRC recomputed)."""
    data = record._data_bytes()
    return bits_from_bytes(data + zlib.crc32(data).to_bytes(4, "big"))


def unpack_record(bits: np.ndarray) -> WatermarkPayload:
    """Decode a 256-bit sequence back to a record, verifying the CRC.

    Raises:
        WrongLength: the sequence is not exactly 256 bits.
        ChecksumMismatch: the stored CRC does not match the first 224 bits,
            signalling a corrupted extraction.
    """
    bits = as_bits(bits)
    if bits.size != PAYLOAD_BITS:
        raise WrongLength(f"expected {PAYLOAD_BITS} bits, got {bits.size}")
    raw = bytes_from_bits(bits)
    stored = int.from_bytes(raw[_DATA_BYTES:], "big")
    if zlib.crc32(raw[:_DATA_BYTES]) != stored:
        raise ChecksumMismatch("payload CRC does not match packed contents")
    return WatermarkPayload(
        licensor_id=int.from_bytes(raw[0:8], "big"),
        licensee_id=int.from_bytes(raw[8:16], "big"),
        timestamp=int.from_bytes(raw[16:24], "big"),
        permission_flags=int.from_bytes(raw[24:28], "big"),
    )
