"""Command-line interface.

Subcommands: keygen, pack, embed, extract, trace, analyze {vote,de-threshold},
simulate sweep. Exit codes: 0 success, 2 configuration/input error, 3 runtime
failure. GS_THREADS caps simulation parallelism.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys

import numpy as np

from . import analysis
from .bits import hex_from_bits
from .cascade import PipelineConfig, embed, extract
from .detect import load_user_table, trace
from .errors import ChecksumMismatch, ConfigurationError, GsmarkError
from .harness import PipelineParams, load_experiment, run_experiment, write_results
from .ldpc import build_code
from .modem import SecretKey, read_latent, write_latent
from .payload import WatermarkPayload, pack_record, unpack_record

_CODES: dict = {}


def _default_pipeline(args, key: SecretKey) -> PipelineConfig:
    params = PipelineParams(code_seed=args.code_seed, assumed_snr_db=getattr(args, "snr_db", 0.0))
    cache_key = (params.n, params.k, params.wc, params.wr, params.code_seed)
    if cache_key not in _CODES:
        _CODES[cache_key] = build_code(params.n, params.k, params.wc, params.wr, params.code_seed)
    return PipelineConfig(
        code=_CODES[cache_key],
        redundancy=params.redundancy,
        key=key,
        assumed_snr_db=params.assumed_snr_db,
        latent_shape=params.shape,
    )


def _load_record(path) -> WatermarkPayload:
    with open(path) as fh:
        obj = json.load(fh)
    try:
        return WatermarkPayload.from_json_obj(obj)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc


def _cmd_keygen(args) -> int:
    key_hex = secrets.token_bytes(32).hex()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(key_hex + "\n")
    else:
        print(key_hex)
    return 0


def _cmd_pack(args) -> int:
    record = _load_record(args.record)
    print(hex_from_bits(pack_record(record)))
    return 0


def _cmd_embed(args) -> int:
    record = _load_record(args.record)
    cfg = _default_pipeline(args, SecretKey.from_hex(args.key))
    rng = np.random.default_rng(args.seed)
    z = embed(pack_record(record), cfg, rng)
    write_latent(args.out, z)
    return 0


def _extract_json(args) -> dict:
    cfg = _default_pipeline(args, SecretKey.from_hex(args.key))
    z = read_latent(getattr(args, "infile"))
    result = extract(z, cfg)
    obj = result.to_json_obj()
    try:
        obj["payload"] = unpack_record(result.info_bits).to_json_obj()
        obj["payload_intact"] = True
    except ChecksumMismatch:
        obj["payload"] = None
        obj["payload_intact"] = False
    return obj


def _cmd_extract(args) -> int:
    print(json.dumps(_extract_json(args), indent=2))
    return 0


def _cmd_trace(args) -> int:
    table = load_user_table(args.table)
    cfg = _default_pipeline(args, SecretKey.from_hex(args.key))
    z = read_latent(args.infile)
    result = extract(z, cfg)
    match = trace(result.info_bits, table, args.fpr, multiplicity=args.multiplicity)
    obj = {
        "matched": match is not None,
        "user_id": match.user_id if match else None,
        "bit_matches": match.bit_matches if match else None,
        "threshold_bits": match.threshold_bits if match else None,
        "extraction_status": result.status.value,
    }
    print(json.dumps(obj, indent=2))
    return 0


def _cmd_analyze_vote(args) -> int:
    obj = {
        "m": args.m,
        "p": args.p,
        "exact": analysis.vote_error_exact(args.m, args.p),
        "chernoff_bound": analysis.vote_error_chernoff(args.m, args.p),
    }
    print(json.dumps(obj, indent=2))
    return 0


def _cmd_analyze_de(args) -> int:
    result = analysis.de_threshold(args.wc, args.wr, tol_db=args.tol_db)
    print(json.dumps(result.to_json_obj(), indent=2))
    return 0


def _cmd_simulate_sweep(args) -> int:
    cfg = load_experiment(args.config)
    rows = run_experiment(cfg, threads=args.threads)
    summary = args.summary
    if summary is None:
        out = str(args.out)
        summary = (out[:-4] if out.endswith(".csv") else out) + ".json"
    write_results(cfg, rows, args.out, summary)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gsmark")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_code_seed(p):
        p.add_argument("--code-seed", type=int, default=1, dest="code_seed")

    p = sub.add_parser("keygen", help="generate a 32-byte key as hex")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_keygen)

    p = sub.add_parser("pack", help="pack a record JSON into hex watermark bits")
    p.add_argument("--record", required=True)
    p.set_defaults(func=_cmd_pack)

    p = sub.add_parser("embed", help="embed a record into a latent file")
    p.add_argument("--record", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    add_code_seed(p)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("extract", help="extract a watermark from a latent file")
    p.add_argument("--in", required=True, dest="infile")
    p.add_argument("--key", required=True)
    p.add_argument("--snr-db", type=float, default=0.0, dest="snr_db")
    add_code_seed(p)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("trace", help="identify the owning user from a table")
    p.add_argument("--table", required=True)
    p.add_argument("--in", required=True, dest="infile")
    p.add_argument("--key", required=True)
    p.add_argument("--snr-db", type=float, default=0.0, dest="snr_db")
    p.add_argument("--fpr", type=float, default=1e-6)
    p.add_argument("--multiplicity", choices=["bonferroni", "fixed"], default="bonferroni")
    add_code_seed(p)
    p.set_defaults(func=_cmd_trace)

    p = sub.add_parser("analyze", help="closed-form reliability tools")
    asub = p.add_subparsers(dest="analysis_command", required=True)
    pv = asub.add_parser("vote", help="majority-vote error: exact and Chernoff bound")
    pv.add_argument("--m", type=int, required=True)
    pv.add_argument("--p", type=float, required=True)
    pv.set_defaults(func=_cmd_analyze_vote)
    pd = asub.add_parser("de-threshold", help="density-evolution threshold by bisection")
    pd.add_argument("--wc", type=int, required=True)
    pd.add_argument("--wr", type=int, required=True)
    pd.add_argument("--tol-db", type=float, default=0.1, dest="tol_db")
    pd.set_defaults(func=_cmd_analyze_de)

    p = sub.add_parser("simulate", help="Monte Carlo experiments")
    ssub = p.add_subparsers(dest="simulate_command", required=True)
    ps = ssub.add_parser("sweep", help="run a sweep config, write CSV + JSON summary")
    ps.add_argument("--config", required=True)
    ps.add_argument("--out", required=True)
    ps.add_argument("--summary", default=None)
    ps.add_argument("--threads", type=int, default=None)
    ps.set_defaults(func=_cmd_simulate_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (GsmarkError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
