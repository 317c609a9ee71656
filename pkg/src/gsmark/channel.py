"""Composable latent-space distortion model.

The stages stand in for everything between writing the initial noise and
reading it back (generation, image-space attacks, inversion): additive
Gaussian noise, independent sign flips, a contiguous burst of sign flips, and
independent drops to exactly zero. Stages apply in listed order; for a fixed
seed the draw order is one RNG call per stage, so outputs are reproducible.

JSON form: a list of stage objects, e.g.
``[{"type": "awgn", "sigma": 1.0}, {"type": "random_flip", "p": 0.2},
{"type": "burst", "start_index": 0, "length": 4096, "flip_p": 0.5},
{"type": "drop", "p": 0.25}]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .bits import random_bits
from .errors import InvalidSpec
from .modem import LatentTensor, hard_bits


@dataclass(frozen=True)
class Awgn:
    sigma: float

    def _validate(self):
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise InvalidSpec(f"awgn sigma must be finite and >= 0, got {self.sigma}")

    def _apply(self, values, rng):
        if self.sigma == 0:
            return values
        return values + self.sigma * rng.standard_normal(values.size)


@dataclass(frozen=True)
class RandomFlip:
    p: float

    def _validate(self):
        if not 0 <= self.p <= 1:
            raise InvalidSpec(f"flip probability must be in [0, 1], got {self.p}")

    def _apply(self, values, rng):
        mask = rng.random(values.size) < self.p
        return np.where(mask, -values, values)


@dataclass(frozen=True)
class Burst:
    start_index: int
    length: int
    flip_p: float

    def _validate(self):
        if not 0 <= self.flip_p <= 1:
            raise InvalidSpec(f"burst flip probability must be in [0, 1], got {self.flip_p}")
        if self.start_index < 0 or self.length < 0:
            raise InvalidSpec("burst window must be non-negative")

    def _apply(self, values, rng):
        lo, hi = self.start_index, self.start_index + self.length
        mask = rng.random(self.length) < self.flip_p
        out = values.copy()
        out[lo:hi] = np.where(mask, -values[lo:hi], values[lo:hi])
        return out


@dataclass(frozen=True)
class Drop:
    p: float

    def _validate(self):
        if not 0 <= self.p <= 1:
            raise InvalidSpec(f"drop probability must be in [0, 1], got {self.p}")

    def _apply(self, values, rng):
        mask = rng.random(values.size) < self.p
        return np.where(mask, 0.0, values)


Stage = Awgn | RandomFlip | Burst | Drop


@dataclass(frozen=True)
class ChannelSpec:
    """Ordered distortion stages applied to a latent tensor."""

    stages: tuple[Stage, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        for stage in self.stages:
            if not isinstance(stage, (Awgn, RandomFlip, Burst, Drop)):
                raise InvalidSpec(f"unknown stage {stage!r}")
            stage._validate()

    def validate_for(self, total_positions: int) -> None:
        for stage in self.stages:
            if isinstance(stage, Burst) and stage.start_index + stage.length > total_positions:
                raise InvalidSpec(
                    f"burst window [{stage.start_index}, "
                    f"{stage.start_index + stage.length}) exceeds {total_positions} positions"
                )


def apply_channel(z: LatentTensor, spec: ChannelSpec, rng: np.random.Generator) -> LatentTensor:
    """Apply all stages in order; returns a new tensor, input untouched."""
    spec.validate_for(z.size)
    values = z.values.copy()
    for stage in spec.stages:
        values = stage._apply(values, rng)
    return LatentTensor(z.channels, z.height, z.width, values)


def effective_flip_probability(
    spec: ChannelSpec, trials: int, rng: np.random.Generator
) -> float:
    """Monte Carlo per-position hard-bit error rate of a channel spec.

    Modulates ``trials`` random bits as one flat signed-half-normal tensor,
    runs it through the channel, and counts hard-bit disagreements. Burst
    windows must fit within ``trials`` positions; estimates for burst specs
    therefore reflect the burst coverage relative to ``trials``.
    """
    if trials < 1:
        raise InvalidSpec("trials must be >= 1")
    spec.validate_for(trials)
    bits = random_bits(rng, trials)
    magnitudes = np.abs(rng.standard_normal(trials))
    values = np.where(bits == 1, magnitudes, -magnitudes)
    shaped = LatentTensor(1, 1, trials, values)
    distorted = apply_channel(shaped, spec, rng)
    return float((hard_bits(distorted.values) != bits).mean())


_STAGE_TAGS = {"awgn": Awgn, "random_flip": RandomFlip, "burst": Burst, "drop": Drop}
_TAG_BY_TYPE = {cls: tag for tag, cls in _STAGE_TAGS.items()}


def to_json_obj(spec: ChannelSpec) -> list[dict]:
    out = []
    for stage in spec.stages:
        obj = {"type": _TAG_BY_TYPE[type(stage)]}
        obj.update(stage.__dict__)
        out.append(obj)
    return out


def from_json_obj(obj) -> ChannelSpec:
    if not isinstance(obj, list):
        raise InvalidSpec("channel spec must be a JSON array of stage objects")
    stages = []
    for entry in obj:
        if not isinstance(entry, dict) or "type" not in entry:
            raise InvalidSpec(f"malformed stage entry: {entry!r}")
        tag = entry["type"]
        if tag not in _STAGE_TAGS:
            raise InvalidSpec(f"unknown stage type {tag!r}")
        kwargs = {k: v for k, v in entry.items() if k != "type"}
        try:
            stages.append(_STAGE_TAGS[tag](**kwargs))
        except TypeError as exc:
            raise InvalidSpec(f"bad fields for stage {tag!r}: {exc}") from exc
    return ChannelSpec(tuple(stages))


def to_json(spec: ChannelSpec) -> str:
    return json.dumps(to_json_obj(spec))


def from_json(text: str) -> ChannelSpec:
    return from_json_obj(json.loads(text))
