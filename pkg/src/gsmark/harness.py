"""Seeded Monte Carlo experiment runner.

Experiments sweep a channel or pipeline parameter and measure, per sweep
point: TPR at a fixed-FPR threshold, mean bit accuracy, the rate of bit-exact
payload recovery, the voting rate, and (optionally) multi-user identification
accuracy. Trial t of sweep point s derives its RNG seed as
``mix(base_seed, s, t)``, so trials are independent, reorderable, and
parallelizable without shared state; results are bit-identical for any worker
count. The ``threads`` argument requests workers; the GS_THREADS environment
variable, when set, caps the request.

The CSV output is the deterministic surface (fixed, versioned schema; no
timing columns); the JSON summary mirrors the rows and adds wall-clock times
plus an echo of the parsed configuration.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import channel as channel_mod
from . import ldpc
from .bits import random_bits
from .cascade import PipelineConfig, embed, extract, first_copy_hard_info
from .channel import ChannelSpec, apply_channel
from .detect import bit_threshold
from .errors import ConfigMismatch, InvalidSpec
from .mixing import derive_seed
from .modem import SecretKey

CSV_SCHEMA = "gsmark-sweep-v1"
_CSV_COLUMNS = ("sweep_value", "tpr_at_fpr", "mean_bit_acc", "tpr_exact", "vote_rate", "trials")
ALLOWED_METRICS = frozenset({"bit_acc", "tpr_fpr", "tpr_exact", "vote_rate"})
TRADEOFF_VARIANTS = ("cascade", "decode_only", "vote_only")
_USERS_TAG = 0x75736572

RATE_DEGREES = {"1/6": (5, 6), "1/4": (3, 4), "2/5": (3, 5), "1/2": (3, 6)}


@dataclass(frozen=True)
class PipelineParams:
    """Picklable pipeline description; the LDPC code is built (and cached) per process."""

    k: int = 256
    wc: int = 3
    wr: int = 4
    redundancy: int = 16
    assumed_snr_db: float = 0.0
    shape: tuple[int, int, int] = (4, 64, 64)
    code_seed: int = 1

    @property
    def n(self) -> int:
        num = self.k * self.wr
        den = self.wr - self.wc
        if den <= 0 or num % den:
            raise ConfigMismatch(
                f"no integer codeword length for k={self.k}, (wc,wr)=({self.wc},{self.wr})"
            )
        return num // den

    def to_json_obj(self) -> dict:
        return {
            "k": self.k,
            "wc": self.wc,
            "wr": self.wr,
            "redundancy": self.redundancy,
            "assumed_snr_db": self.assumed_snr_db,
            "shape": list(self.shape),
            "code_seed": self.code_seed,
        }


@dataclass(frozen=True)
class SweepPoint:
    value: float
    pipeline: PipelineParams
    channel: ChannelSpec


@dataclass(frozen=True)
class ExperimentConfig:
    trials: int
    base_seed: int
    pipeline: PipelineParams = PipelineParams()
    channel: ChannelSpec = ChannelSpec()
    sweep: tuple[SweepPoint, ...] | None = None
    metrics: frozenset = ALLOWED_METRICS
    users: int | None = None
    fpr: float = 1e-6

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigMismatch("trials must be >= 1")
        bad = set(self.metrics) - ALLOWED_METRICS
        if bad:
            raise ConfigMismatch(f"unknown metrics: {sorted(bad)}")
        if self.users is not None and self.users < 1:
            raise ConfigMismatch("users must be >= 1 when given")
        if not 0 < self.fpr < 1:
            raise ConfigMismatch("fpr must lie strictly between 0 and 1")

    def points(self) -> tuple[SweepPoint, ...]:
        if self.sweep is not None:
            return self.sweep
        return (SweepPoint(0.0, self.pipeline, self.channel),)

    def to_json_obj(self) -> dict:
        obj = {
            "trials": self.trials,
            "base_seed": self.base_seed,
            "fpr": self.fpr,
            "pipeline": self.pipeline.to_json_obj(),
            "channel": channel_mod.to_json_obj(self.channel),
            "metrics": sorted(self.metrics),
        }
        if self.users is not None:
            obj["users"] = self.users
        if self.sweep is not None:
            obj["sweep"] = [
                {
                    "value": pt.value,
                    "pipeline": pt.pipeline.to_json_obj(),
                    "channel": channel_mod.to_json_obj(pt.channel),
                }
                for pt in self.sweep
            ]
        return obj


@dataclass
class ResultRow:
    sweep_value: float
    tpr_at_fpr: float
    mean_bit_acc: float
    tpr_exact: float
    vote_rate: float
    trials: int
    wall_time_ms: float
    ident_acc: float | None = None

    def to_json_obj(self, metrics=ALLOWED_METRICS) -> dict:
        obj = {"sweep_value": self.sweep_value, "trials": self.trials,
               "wall_time_ms": self.wall_time_ms}
        if "tpr_fpr" in metrics:
            obj["tpr_at_fpr"] = self.tpr_at_fpr
        if "bit_acc" in metrics:
            obj["mean_bit_acc"] = self.mean_bit_acc
        if "tpr_exact" in metrics:
            obj["tpr_exact"] = self.tpr_exact
        if "vote_rate" in metrics:
            obj["vote_rate"] = self.vote_rate
        if self.ident_acc is not None:
            obj["ident_acc"] = self.ident_acc
        return obj


_CODE_CACHE: dict = {}


def _code_for(params: PipelineParams) -> ldpc.LdpcCode:
    key = (params.n, params.k, params.wc, params.wr, params.code_seed)
    code = _CODE_CACHE.get(key)
    if code is None:
        code = ldpc.build_code(params.n, params.k, params.wc, params.wr, params.code_seed)
        _CODE_CACHE[key] = code
    return code


def _pipeline_config(params: PipelineParams, key: SecretKey) -> PipelineConfig:
    return PipelineConfig(
        code=_code_for(params),
        redundancy=params.redundancy,
        key=key,
        assumed_snr_db=params.assumed_snr_db,
        latent_shape=params.shape,
    )


_USER_TABLE_CACHE: dict = {}


def _user_matrix(base_seed: int, users: int, k: int) -> np.ndarray:
    cache_key = (base_seed, users, k)
    matrix = _USER_TABLE_CACHE.get(cache_key)
    if matrix is None:
        rng = np.random.default_rng(derive_seed(base_seed, _USERS_TAG))
        matrix = random_bits(rng, users * k).reshape(users, k)
        _USER_TABLE_CACHE[cache_key] = matrix
    return matrix


def _run_one_trial(cfg: ExperimentConfig, point: SweepPoint, sweep_index: int, trial: int):
    """Returns (bit_acc, detected, exact, vote_invoked, identified)."""
    rng = np.random.default_rng(derive_seed(cfg.base_seed, sweep_index, trial))
    params = point.pipeline
    payload = random_bits(rng, params.k)
    key = SecretKey(rng.bytes(32))
    pipe = _pipeline_config(params, key)
    z = embed(payload, pipe, rng)
    distorted = apply_channel(z, point.channel, rng)
    result = extract(distorted, pipe)

    matches = int((result.info_bits == payload).sum())
    bit_acc = matches / params.k
    detected = matches >= bit_threshold(params.k, cfg.fpr)
    exact = matches == params.k

    identified = None
    if cfg.users is not None:
        # planted user carries this trial's payload; others are fixed random marks.
        # Bonferroni threshold over users + 1 comparisons; the planted user has
        # the highest id, so it must strictly beat every registered mark.
        others = _user_matrix(cfg.base_seed, cfg.users, params.k)
        threshold = bit_threshold(params.k, cfg.fpr / (cfg.users + 1))
        other_matches = (others == result.info_bits).sum(axis=1)
        identified = matches >= threshold and matches > int(other_matches.max())
    return bit_acc, detected, exact, result.vote_invoked, identified


def _run_trial_range(cfg: ExperimentConfig, sweep_index: int, lo: int, hi: int):
    point = cfg.points()[sweep_index]
    return [_run_one_trial(cfg, point, sweep_index, t) for t in range(lo, hi)]


def _worker_count(threads: int | None) -> int:
    requested = 1 if threads is None else threads
    if requested < 1:
        raise ConfigMismatch("threads must be >= 1")
    cap_env = os.environ.get("GS_THREADS")
    if cap_env is not None:
        cap = int(cap_env)
        if cap < 1:
            raise ConfigMismatch("GS_THREADS must be >= 1")
        requested = min(requested, cap)
    return requested


def _collect_point(cfg: ExperimentConfig, sweep_index: int, workers: int, pool) -> ResultRow:
    start = time.perf_counter()
    if pool is None:
        outcomes = _run_trial_range(cfg, sweep_index, 0, cfg.trials)
    else:
        chunk = max(1, math.ceil(cfg.trials / (workers * 4)))
        futures = [
            pool.submit(_run_trial_range, cfg, sweep_index, lo, min(lo + chunk, cfg.trials))
            for lo in range(0, cfg.trials, chunk)
        ]
        outcomes = [item for fut in futures for item in fut.result()]
    point = cfg.points()[sweep_index]
    bit_accs = [o[0] for o in outcomes]
    row = ResultRow(
        sweep_value=point.value,
        tpr_at_fpr=sum(o[1] for o in outcomes) / cfg.trials,
        mean_bit_acc=math.fsum(bit_accs) / cfg.trials,
        tpr_exact=sum(o[2] for o in outcomes) / cfg.trials,
        vote_rate=sum(o[3] for o in outcomes) / cfg.trials,
        trials=cfg.trials,
        wall_time_ms=(time.perf_counter() - start) * 1e3,
    )
    if cfg.users is not None:
        row.ident_acc = sum(o[4] for o in outcomes) / cfg.trials
    return row


def run_experiment(cfg: ExperimentConfig, threads: int | None = None) -> list[ResultRow]:
    """Run all sweep points; deterministic for a given config, any worker count."""
    workers = _worker_count(threads)
    points = cfg.points()
    for point in points:
        # fail fast on infeasible pipeline/channel combinations
        point.pipeline.n
        point.channel.validate_for(
            point.pipeline.shape[0] * point.pipeline.shape[1] * point.pipeline.shape[2]
        )
    if workers == 1:
        return [_collect_point(cfg, s, 1, None) for s in range(len(points))]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [_collect_point(cfg, s, workers, pool) for s in range(len(points))]


@dataclass
class TradeoffRow:
    variant: str
    exact_rate: float
    trials: int


def _tradeoff_trial(cfg: ExperimentConfig, trial: int):
    rng = np.random.default_rng(derive_seed(cfg.base_seed, 0, trial))
    params = cfg.pipeline
    payload = random_bits(rng, params.k)
    key = SecretKey(rng.bytes(32))
    pipe = _pipeline_config(params, key)
    z = embed(payload, pipe, rng)
    distorted = apply_channel(z, cfg.channel, rng)
    result = extract(distorted, pipe)

    cascade_exact = bool((result.info_bits == payload).all())
    if result.vote_invoked:
        decode_only_bits = first_copy_hard_info(distorted, pipe)
    else:
        decode_only_bits = result.info_bits
    decode_only_exact = bool((decode_only_bits == payload).all())
    vote_only_bits = result.voted_codeword[pipe.code.info_positions]
    vote_only_exact = bool((vote_only_bits == payload).all())
    return cascade_exact, decode_only_exact, vote_only_exact


def run_tradeoff(cfg: ExperimentConfig, threads: int | None = None) -> list[TradeoffRow]:
    """Paired comparison of the full cascade against its two ablations.

    All three variants see identical seeds, payloads, keys, and channel draws
    (the per-copy decode pass and the vote are shared within a trial), giving
    a per-variant bit-exact recovery rate over the base channel.
    """
    workers = _worker_count(threads)
    if workers == 1:
        outcomes = [_tradeoff_trial(cfg, t) for t in range(cfg.trials)]
    else:
        chunk = max(1, math.ceil(cfg.trials / (workers * 4)))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_tradeoff_chunk, cfg, lo, min(lo + chunk, cfg.trials))
                for lo in range(0, cfg.trials, chunk)
            ]
            outcomes = [item for fut in futures for item in fut.result()]
    rates = [sum(o[i] for o in outcomes) / cfg.trials for i in range(3)]
    return [TradeoffRow(name, rate, cfg.trials) for name, rate in zip(TRADEOFF_VARIANTS, rates)]


def _tradeoff_chunk(cfg: ExperimentConfig, lo: int, hi: int):
    return [_tradeoff_trial(cfg, t) for t in range(lo, hi)]


def pipeline_from_json_obj(obj: dict, base: PipelineParams | None = None) -> PipelineParams:
    base = base or PipelineParams()
    obj = dict(obj)
    if "rate" in obj:
        rate = obj.pop("rate")
        if rate not in RATE_DEGREES:
            raise InvalidSpec(
                f"unsupported rate {rate!r}; known rates: {sorted(RATE_DEGREES)} "
                "(give wc/wr explicitly for other ensembles)"
            )
        obj["wc"], obj["wr"] = RATE_DEGREES[rate]
    if "shape" in obj:
        shape = obj.pop("shape")
        if not (isinstance(shape, (list, tuple)) and len(shape) == 3):
            raise InvalidSpec("shape must be a 3-element list [C, H, W]")
        obj["shape"] = tuple(int(x) for x in shape)
    known = {"k", "wc", "wr", "redundancy", "assumed_snr_db", "shape", "code_seed"}
    unknown = set(obj) - known
    if unknown:
        raise InvalidSpec(f"unknown pipeline fields: {sorted(unknown)}")
    return replace(base, **obj)


def experiment_from_json_obj(obj: dict) -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise ConfigMismatch("experiment config must be a JSON object")
    known = {"trials", "base_seed", "pipeline", "channel", "sweep", "metrics", "users", "fpr"}
    unknown = set(obj) - known
    if unknown:
        raise ConfigMismatch(f"unknown config fields: {sorted(unknown)}")
    for req in ("trials", "base_seed"):
        if req not in obj:
            raise ConfigMismatch(f"missing required config field {req!r}")
    pipeline = pipeline_from_json_obj(obj.get("pipeline", {}))
    base_channel = channel_mod.from_json_obj(obj.get("channel", []))
    sweep = None
    if "sweep" in obj:
        points = []
        for entry in obj["sweep"]:
            if not isinstance(entry, dict) or "value" not in entry:
                raise ConfigMismatch(f"sweep entries need a 'value': {entry!r}")
            pt_pipeline = pipeline_from_json_obj(entry.get("pipeline", {}), base=pipeline)
            pt_channel = (
                channel_mod.from_json_obj(entry["channel"])
                if "channel" in entry
                else base_channel
            )
            extra = set(entry) - {"value", "pipeline", "channel"}
            if extra:
                raise ConfigMismatch(f"unknown sweep fields: {sorted(extra)}")
            points.append(SweepPoint(float(entry["value"]), pt_pipeline, pt_channel))
        if not points:
            raise ConfigMismatch("sweep list must not be empty")
        sweep = tuple(points)
    return ExperimentConfig(
        trials=int(obj["trials"]),
        base_seed=int(obj["base_seed"]),
        pipeline=pipeline,
        channel=base_channel,
        sweep=sweep,
        metrics=frozenset(obj.get("metrics", ALLOWED_METRICS)),
        users=obj.get("users"),
        fpr=float(obj.get("fpr", 1e-6)),
    )


def load_experiment(path) -> ExperimentConfig:
    with open(path) as fh:
        return experiment_from_json_obj(json.load(fh))


def rows_to_csv(rows: list[ResultRow]) -> str:
    lines = [f"# {CSV_SCHEMA} columns={','.join(_CSV_COLUMNS)}"]
    lines.append(",".join(_CSV_COLUMNS))
    for row in rows:
        lines.append(
            ",".join(
                str(v)
                for v in (
                    row.sweep_value,
                    row.tpr_at_fpr,
                    row.mean_bit_acc,
                    row.tpr_exact,
                    row.vote_rate,
                    row.trials,
                )
            )
        )
    return "\n".join(lines) + "\n"


def write_results(cfg: ExperimentConfig, rows: list[ResultRow], csv_path, summary_path=None):
    """Write the CSV (deterministic) and a JSON summary mirroring the rows."""
    with open(csv_path, "w") as fh:
        fh.write(rows_to_csv(rows))
    if summary_path is not None:
        summary = {
            "schema": CSV_SCHEMA,
            "config": cfg.to_json_obj(),
            "rows": [row.to_json_obj(cfg.metrics) for row in rows],
        }
        with open(summary_path, "w") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
