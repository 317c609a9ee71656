"""Channel-coded watermarking of Gaussian latent tensors.

A payload is LDPC-encoded, repeated across the latent, keyed-randomized, and
sign-modulated onto half-normal magnitudes so the carrier stays standard
normal. Extraction reverses the chain with a cascaded rule: per-copy decoding,
then majority voting plus decoding, then verify-only fuzzy matching. The
``channel`` module simulates the distortions between embedding and
extraction; ``analysis`` and ``harness`` provide the closed-form tools and
Monte Carlo sweeps used to characterize reliability.
"""

from .cascade import (
    ExtractStatus,
    ExtractionResult,
    PipelineConfig,
    embed,
    extract,
    majority_vote,
)
from .channel import Awgn, Burst, ChannelSpec, Drop, RandomFlip, apply_channel
from .detect import DetectionReport, UserTable, bit_threshold, trace
from .ldpc import LdpcCode, build_code, decode, encode, parity_check
from .modem import LatentTensor, SecretKey, derive_keystream, sample_latent
from .payload import WatermarkPayload, pack_record, unpack_record

__version__ = "0.1.0"

__all__ = [
    "Awgn",
    "Burst",
    "ChannelSpec",
    "DetectionReport",
    "Drop",
    "ExtractStatus",
    "ExtractionResult",
    "LatentTensor",
    "LdpcCode",
    "PipelineConfig",
    "RandomFlip",
    "SecretKey",
    "UserTable",
    "WatermarkPayload",
    "apply_channel",
    "bit_threshold",
    "build_code",
    "decode",
    "derive_keystream",
    "embed",
    "encode",
    "extract",
    "majority_vote",
    "pack_record",
    "parity_check",
    "sample_latent",
    "trace",
    "unpack_record",
]
