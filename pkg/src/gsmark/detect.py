"""Threshold detection at fixed false-positive rate, and multi-user tracing.

The detection null model is k independent fair bits, so the match count of an
unrelated extraction is Binomial(k, 1/2). ``bit_threshold`` computes the
smallest count whose exact upper tail stays at or below the FPR target, using
big-integer arithmetic (no floating-point tail summation).

For tracing against N users the default threshold is Bonferroni-corrected
(per-comparison FPR = target / N) so the family-wise false-positive rate
stays at the target; ``multiplicity="fixed"`` reproduces the single-table
threshold regardless of N.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .bits import as_bits, bits_from_hex, hex_from_bits
from .errors import DomainError, FormatError, LengthMismatch


@lru_cache(maxsize=4096)
def bit_threshold(k: int, fpr: float) -> int:
    """Smallest match count t with P[Binomial(k, 1/2) >= t] <= fpr.

    Returns k + 1 when even a perfect match would exceed the FPR budget
    (detection impossible at this k).
    """
    if k < 1:
        raise DomainError("k must be >= 1")
    if not 0 < fpr < 1:
        raise DomainError("fpr must lie strictly between 0 and 1")
    budget = Fraction(fpr) * (1 << k)
    tail = 0
    # walk the tail downwards from t = k + 1 (empty tail) while it fits the budget
    for t in range(k, -1, -1):
        tail += math.comb(k, t)
        if tail > budget:
            return t + 1
    return 0


@dataclass(frozen=True)
class DetectionReport:
    bit_matches: int
    bit_accuracy: float
    threshold_bits: int
    fpr_target: float
    detected: bool
    exact: bool

    def to_json_obj(self) -> dict:
        return {
            "bit_matches": self.bit_matches,
            "bit_accuracy": self.bit_accuracy,
            "threshold_bits": self.threshold_bits,
            "fpr_target": self.fpr_target,
            "detected": self.detected,
            "exact": self.exact,
        }


def detect(extracted: np.ndarray, reference: np.ndarray, fpr: float) -> DetectionReport:
    """Compare extracted bits against one reference watermark."""
    extracted = as_bits(extracted)
    reference = as_bits(reference)
    if extracted.size != reference.size:
        raise LengthMismatch(
            f"extracted ({extracted.size}) and reference ({reference.size}) lengths differ"
        )
    k = extracted.size
    matches = int((extracted == reference).sum())
    threshold = bit_threshold(k, fpr)
    return DetectionReport(
        bit_matches=matches,
        bit_accuracy=matches / k,
        threshold_bits=threshold,
        fpr_target=fpr,
        detected=matches >= threshold,
        exact=matches == k,
    )


class TraceMatch(NamedTuple):
    user_id: int
    bit_matches: int
    threshold_bits: int


@dataclass
class UserTable:
    """Registered users and their unique watermarks (all the same length)."""

    entries: list[tuple[int, np.ndarray]]

    _matrix: np.ndarray | None = None
    _ids: np.ndarray | None = None

    def __post_init__(self):
        if not self.entries:
            raise ValueError("user table must not be empty")
        ids = [uid for uid, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("user ids must be unique")
        marks = np.stack([as_bits(bits) for _, bits in self.entries])
        if len({m.tobytes() for m in marks}) != len(ids):
            raise ValueError("watermarks must be unique per user")
        self._matrix = marks
        self._ids = np.asarray(ids, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def watermark_bits(self) -> int:
        return self._matrix.shape[1]


def trace(
    extracted: np.ndarray,
    table: UserTable,
    fpr: float,
    multiplicity: str = "bonferroni",
) -> TraceMatch | None:
    """Identify the owner: most bit matches among users above the threshold.

    Ties break toward the lowest user id; returns None when nobody qualifies.
    """
    extracted = as_bits(extracted)
    if extracted.size != table.watermark_bits:
        raise LengthMismatch(
            f"extraction has {extracted.size} bits, table stores {table.watermark_bits}"
        )
    if multiplicity == "bonferroni":
        per_comparison_fpr = fpr / len(table)
    elif multiplicity == "fixed":
        per_comparison_fpr = fpr
    else:
        raise DomainError(f"unknown multiplicity mode {multiplicity!r}")
    threshold = bit_threshold(extracted.size, per_comparison_fpr)

    matches = (table._matrix == extracted).sum(axis=1)
    qualified = matches >= threshold
    if not qualified.any():
        return None
    best = matches[qualified].max()
    candidates = table._ids[qualified & (matches == best)]
    return TraceMatch(int(candidates.min()), int(best), threshold)


_CSV_HEADER = ["user_id", "watermark_hex"]


def save_user_table(path, table: UserTable) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        for uid, bits in table.entries:
            writer.writerow([uid, hex_from_bits(bits)])


def load_user_table(path) -> UserTable:
    entries = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        raise FormatError("user table CSV is empty")
    if rows[0] == _CSV_HEADER:
        rows = rows[1:]
    for lineno, row in enumerate(rows, start=1):
        if len(row) != 2:
            raise FormatError(f"user table line {lineno}: expected 2 columns")
        try:
            uid = int(row[0])
        except ValueError as exc:
            raise FormatError(f"user table line {lineno}: bad user id {row[0]!r}") from exc
        entries.append((uid, bits_from_hex(row[1])))
    try:
        return UserTable(entries)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc
