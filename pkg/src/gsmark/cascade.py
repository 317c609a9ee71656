"""End-to-end embed/extract pipelines with the three-stage extraction rule.

Extraction tries, in order: (1) decode each codeword copy independently and
take the lowest-index success; (2) majority-vote the copies by summed soft
values and decode the voted word from constant-magnitude LLRs; (3) fall back
to the voted word's raw systematic bits, usable only for fuzzy verification.

Soft values from the modem are positive for bit 1, while the decoder's LLR
convention is positive-favors-0, so LLRs are negated soft values scaled by
``4 * 10**(assumed_snr_db / 10)``.

The codeword copies fill the first ``n * redundancy`` latent positions; any
remaining tail carries unmodulated (still standard normal) noise and is
ignored on extraction, which allows redundancy sweeps below the latent
capacity at a fixed tensor shape.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import ldpc
from .bits import as_bits, hex_from_bits, random_bits
from .errors import ConfigMismatch, LengthMismatch
from .ldpc import LdpcCode
from .modem import (
    LatentTensor,
    SecretKey,
    demodulate_soft,
    derive_keystream,
    hard_bits,
    randomize,
    repeat_expand,
    sample_latent,
)

DEFAULT_LATENT_SHAPE = (4, 64, 64)
DEFAULT_ASSUMED_SNR_DB = 0.0


class ExtractStatus(enum.Enum):
    EXACT_SINGLE = "exact_single"
    EXACT_VOTED = "exact_voted"
    VERIFY_ONLY = "verify_only"


@dataclass(frozen=True)
class PipelineConfig:
    code: LdpcCode
    redundancy: int
    key: SecretKey
    assumed_snr_db: float = DEFAULT_ASSUMED_SNR_DB
    latent_shape: tuple[int, int, int] = DEFAULT_LATENT_SHAPE

    def __post_init__(self):
        if self.redundancy < 1:
            raise ConfigMismatch("redundancy must be >= 1")
        if self.code.n * self.redundancy > self.latent_size:
            raise ConfigMismatch(
                f"{self.redundancy} copies of n={self.code.n} exceed the "
                f"{self.latent_size}-position latent"
            )

    @property
    def latent_size(self) -> int:
        c, h, w = self.latent_shape
        return c * h * w

    @property
    def used_positions(self) -> int:
        return self.code.n * self.redundancy


@dataclass
class ExtractionResult:
    """Outcome of an extraction attempt.

    ``info_bits`` holds the recovered information bits for the exact
    statuses; for VERIFY_ONLY it carries the voted word's systematic bits so
    threshold detection can still fuzzy-match. ``per_copy_parity[r]`` records
    whether copy r decoded to a parity-satisfying word on its own, and
    ``vote_invoked`` is true exactly when no copy did. ``decoded_codeword``
    is the parity-satisfying word behind an exact status (None otherwise).
    """

    status: ExtractStatus
    info_bits: np.ndarray
    voted_codeword: np.ndarray
    per_copy_parity: np.ndarray
    vote_invoked: bool
    copy_index: int | None = None
    decoded_codeword: np.ndarray | None = None

    @property
    def exact(self) -> bool:
        return self.status is not ExtractStatus.VERIFY_ONLY

    def to_json_obj(self) -> dict:
        return {
            "status": self.status.value,
            "copy_index": self.copy_index,
            "vote_invoked": self.vote_invoked,
            "per_copy_parity": [bool(x) for x in self.per_copy_parity],
            "info_bits_hex": hex_from_bits(self.info_bits),
        }


def _llr_scale(assumed_snr_db: float) -> float:
    return 4.0 * 10.0 ** (assumed_snr_db / 10.0)


def embed(info: np.ndarray, cfg: PipelineConfig, rng: np.random.Generator) -> LatentTensor:
    """Encode, repeat, randomize, and sign-modulate a payload into a latent tensor."""
    info = as_bits(info)
    if info.size != cfg.code.k:
        raise ConfigMismatch(f"payload must be {cfg.code.k} bits, got {info.size}")
    codeword = ldpc.encode(cfg.code, info)
    signal = np.empty(cfg.latent_size, dtype=np.uint8)
    signal[: cfg.used_positions] = repeat_expand(codeword, cfg.redundancy)
    signal[cfg.used_positions:] = random_bits(rng, cfg.latent_size - cfg.used_positions)
    keystream = derive_keystream(cfg.key, cfg.latent_size)
    return sample_latent(randomize(signal, keystream), cfg.latent_shape, rng)


def majority_vote(copies: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Bit-by-bit vote over soft-value copies.

    Votes by the sign of the per-position soft sum (tie -> bit 0), which
    matches the hard-count majority whenever magnitudes are symmetric and no
    tie occurs. Returns (voted hard bits, aggregated soft values).
    """
    copies = np.asarray(copies, dtype=np.float64)
    if copies.ndim != 2 or copies.shape[0] < 1:
        raise LengthMismatch("expected a (copies, n) array with at least one copy")
    aggregated = copies.sum(axis=0)
    return (aggregated > 0).astype(np.uint8), aggregated


def extract(z: LatentTensor, cfg: PipelineConfig, max_iter: int = ldpc.DEFAULT_MAX_ITER) -> ExtractionResult:
    """Run the cascaded extraction rule against a (possibly distorted) latent."""
    if z.shape != cfg.latent_shape:
        raise ConfigMismatch(f"latent shape {z.shape} != configured {cfg.latent_shape}")
    code = cfg.code
    keystream = derive_keystream(cfg.key, cfg.latent_size)
    soft = demodulate_soft(z, keystream)[: cfg.used_positions]
    copies = soft.reshape(cfg.redundancy, code.n)

    scale = _llr_scale(cfg.assumed_snr_db)
    hard, decoded, _ = ldpc.decode_soft_batch(code, -scale * copies, max_iter)
    voted, _ = majority_vote(copies)

    if decoded.any():
        first = int(np.flatnonzero(decoded)[0])
        return ExtractionResult(
            status=ExtractStatus.EXACT_SINGLE,
            info_bits=hard[first][code.info_positions],
            voted_codeword=voted,
            per_copy_parity=decoded,
            vote_invoked=False,
            copy_index=first,
            decoded_codeword=hard[first],
        )

    voted_llrs = np.where(voted == 1, -scale, scale)
    outcome = ldpc.decode(code, voted_llrs, max_iter)
    if outcome.decoded:
        return ExtractionResult(
            status=ExtractStatus.EXACT_VOTED,
            info_bits=outcome.codeword[code.info_positions],
            voted_codeword=voted,
            per_copy_parity=decoded,
            vote_invoked=True,
            decoded_codeword=outcome.codeword,
        )
    return ExtractionResult(
        status=ExtractStatus.VERIFY_ONLY,
        info_bits=voted[code.info_positions],
        voted_codeword=voted,
        per_copy_parity=decoded,
        vote_invoked=True,
    )


def first_copy_hard_info(z: LatentTensor, cfg: PipelineConfig) -> np.ndarray:
    """Raw (undecoded) systematic bits of copy 0; the no-ECC, no-vote baseline."""
    keystream = derive_keystream(cfg.key, cfg.latent_size)
    soft = demodulate_soft(z, keystream)[: cfg.code.n]
    return hard_bits(soft)[cfg.code.info_positions]
