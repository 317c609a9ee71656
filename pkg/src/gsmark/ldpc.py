"""Regular LDPC code: construction, systematic encoding, and sum-product decoding.

Conventions fixed here and relied on everywhere else:

* LLR sign: positive favors bit 0 (``llr = log P(bit=0)/P(bit=1)``).
* Hard decision at LLR exactly 0 is bit 0.
* Messages are clamped to ``MESSAGE_CLAMP`` = +-20; the decoder uses the
  flooding-schedule tanh rule with early exit on parity satisfaction.

Construction draws a (wc, wr)-regular bipartite graph by randomly matching
variable sockets to check sockets, repairing duplicate edges so every check
touches wr distinct variables. A full-rank parity matrix is required (it fixes
the code dimension at exactly k and yields the systematic encoder); attempts
are re-seeded until one passes, up to a fixed retry budget. Note the classic
stacked-permutation layering cannot be used here: the rows of each layer sum
to the all-ones vector, so such matrices are never full rank.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field

import numpy as np

from .bits import as_bits
from .errors import (
    ConstructionFailed,
    FormatError,
    InfeasibleParameters,
    NonFiniteInput,
    WrongLength,
)

MESSAGE_CLAMP = 20.0
DEFAULT_MAX_ITER = 50
CONSTRUCTION_ATTEMPTS = 64
_EDGE_REPAIR_ROUNDS = 500
_ATANH_GUARD = 1.0 - 1e-12


class DecodeStatus(enum.Enum):
    DECODED = "decoded"
    PARITY_FAIL = "parity_fail"


@dataclass
class DecodeOutcome:
    status: DecodeStatus
    codeword: np.ndarray | None
    iterations_used: int

    @property
    def decoded(self) -> bool:
        return self.status is DecodeStatus.DECODED


@dataclass(eq=False)
class LdpcCode:
    """Immutable code description plus derived encoder/decoder structures.

    ``check_vars[c]`` lists the wr variables of check c (sorted). Edges are
    numbered check-major (edge ``c*wr + i`` connects check c to its i-th
    variable); ``var_edges[v]`` lists the wc edge ids of variable v. The
    systematic encoder places information bits at ``info_positions`` and
    solves ``parity = parity_solver @ info (mod 2)`` at ``parity_positions``.
    """

    n: int
    k: int
    wc: int
    wr: int
    seed: int | None
    check_vars: np.ndarray
    info_positions: np.ndarray
    parity_positions: np.ndarray
    parity_solver: np.ndarray
    var_edges: np.ndarray = field(repr=False)
    _var_edges_flat: np.ndarray = field(repr=False)
    _solver_int: np.ndarray = field(repr=False)

    @property
    def num_checks(self) -> int:
        return self.n - self.k

    @property
    def rate(self) -> float:
        return self.k / self.n


def _validate_parameters(n: int, k: int, wc: int, wr: int) -> None:
    if wc < 2:
        raise InfeasibleParameters(f"column weight must be >= 2, got {wc}")
    if wr <= wc:
        raise InfeasibleParameters(f"row weight must exceed column weight ({wr} <= {wc})")
    if (n * wc) % wr:
        raise InfeasibleParameters(f"n*wc = {n * wc} is not divisible by wr = {wr}")
    if n - k != (n * wc) // wr:
        raise InfeasibleParameters(
            f"degree equation requires n-k = n*wc/wr = {(n * wc) // wr}, got {n - k}"
        )


def _match_regular_graph(n: int, m: int, wc: int, wr: int, rng) -> np.ndarray | None:
    """Random socket matching into an (m, wr) adjacency; None if repair fails."""
    sockets = np.repeat(np.arange(n, dtype=np.int32), wc)
    adj = rng.permutation(sockets).reshape(m, wr)
    flat = adj.ravel()
    for _ in range(_EDGE_REPAIR_ROUNDS):
        adj.sort(axis=1)
        dup_rows = np.nonzero((adj[:, 1:] == adj[:, :-1]).any(axis=1))[0]
        if dup_rows.size == 0:
            return adj
        # swap one duplicated socket per offending check with a random socket
        for r in dup_rows:
            row = adj[r]
            for i in range(1, wr):
                if row[i] == row[i - 1]:
                    j = int(rng.integers(0, flat.size))
                    e = r * wr + i
                    flat[e], flat[j] = flat[j], flat[e]
                    break
    return None


def _dense_from_adjacency(adj: np.ndarray, n: int) -> np.ndarray:
    m, wr = adj.shape
    h = np.zeros((m, n), dtype=np.uint8)
    h[np.repeat(np.arange(m), wr), adj.ravel()] = 1
    return h


def _systematic_form(h: np.ndarray):
    """Gauss-Jordan over GF(2) with recorded column swaps.

    Returns (solver, parity_positions, info_positions) or None when the
    matrix is rank deficient.
    """
    m, n = h.shape
    work = h.copy()
    colperm = np.arange(n)
    for r in range(m):
        pivots = np.nonzero(work[r:, r])[0]
        if pivots.size == 0:
            later = np.nonzero(work[r:, r + 1:].any(axis=0))[0]
            if later.size == 0:
                return None
            j = r + 1 + later[0]
            work[:, [r, j]] = work[:, [j, r]]
            colperm[[r, j]] = colperm[[j, r]]
            pivots = np.nonzero(work[r:, r])[0]
        i = r + pivots[0]
        if i != r:
            work[[r, i]] = work[[i, r]]
        rows = np.nonzero(work[:, r])[0]
        rows = rows[rows != r]
        work[rows] ^= work[r]
    return work[:, m:].copy(), colperm[:m].copy(), colperm[m:].copy()


def _assemble(n, k, wc, wr, seed, adj, solver, parity_pos, info_pos) -> LdpcCode:
    m = n - k
    order = np.argsort(adj.ravel(), kind="stable").astype(np.int32)
    var_edges = order.reshape(n, wc)
    return LdpcCode(
        n=n,
        k=k,
        wc=wc,
        wr=wr,
        seed=seed,
        check_vars=adj.astype(np.int32),
        info_positions=info_pos.astype(np.int32),
        parity_positions=parity_pos.astype(np.int32),
        parity_solver=solver.astype(np.uint8),
        var_edges=var_edges,
        _var_edges_flat=var_edges.ravel().copy(),
        _solver_int=solver.astype(np.int32),
    )


def build_code(n: int, k: int, wc: int, wr: int, seed: int) -> LdpcCode:
    """Construct a (wc, wr)-regular code with full-rank parity, deterministically.

    Raises:
        InfeasibleParameters: degree equation cannot be satisfied.
        ConstructionFailed: no simple full-rank graph found within the budget.
    """
    _validate_parameters(n, k, wc, wr)
    m = n - k
    for attempt in range(CONSTRUCTION_ATTEMPTS):
        rng = np.random.default_rng(seed + attempt)
        adj = _match_regular_graph(n, m, wc, wr, rng)
        if adj is None:
            continue
        sys_form = _systematic_form(_dense_from_adjacency(adj, n))
        if sys_form is None:
            continue
        solver, parity_pos, info_pos = sys_form
        return _assemble(n, k, wc, wr, seed, adj, solver, parity_pos, info_pos)
    raise ConstructionFailed(
        f"no full-rank ({wc},{wr})-regular matrix for n={n}, k={k} "
        f"in {CONSTRUCTION_ATTEMPTS} attempts from seed {seed}"
    )


def dense_parity_matrix(code: LdpcCode) -> np.ndarray:
    """Materialize the sparse adjacency as a dense 0/1 matrix (for inspection)."""
    return _dense_from_adjacency(code.check_vars, code.n)


def encode(code: LdpcCode, info: np.ndarray) -> np.ndarray:
    """Systematic encode: info bits land at ``info_positions``, parity solves H c = 0."""
    info = as_bits(info)
    if info.size != code.k:
        raise WrongLength(f"expected {code.k} information bits, got {info.size}")
    word = np.zeros(code.n, dtype=np.uint8)
    word[code.info_positions] = info
    word[code.parity_positions] = (code._solver_int @ info.astype(np.int32)) & 1
    return word


def parity_check(code: LdpcCode, word: np.ndarray) -> bool:
    word = as_bits(word)
    if word.size != code.n:
        raise WrongLength(f"expected {code.n} bits, got {word.size}")
    return not (word[code.check_vars].sum(axis=1) & 1).any()


def _syndrome_ok(code: LdpcCode, bits: np.ndarray) -> np.ndarray:
    """Per-row parity satisfaction for a (B, n) bit batch."""
    return ~((bits[:, code.check_vars].sum(axis=2) & 1).any(axis=1))


def decode_soft_batch(code: LdpcCode, llrs: np.ndarray, max_iter: int = DEFAULT_MAX_ITER):
    """Sum-product decode a (B, n) batch of LLR vectors.

    Returns (hard_bits (B, n), decoded (B,), iterations (B,)). Rows whose
    initial hard decisions already satisfy parity report 0 iterations; rows
    that never satisfy parity report ``max_iter`` and their final hard
    decisions.
    """
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.ndim != 2 or llrs.shape[1] != code.n:
        raise WrongLength(f"expected LLR batch of shape (B, {code.n}), got {llrs.shape}")
    if not np.isfinite(llrs).all():
        raise NonFiniteInput("LLR inputs must be finite")
    if max_iter < 0:
        raise ValueError("max_iter must be >= 0")

    batch = llrs.shape[0]
    m, wr = code.num_checks, code.wr
    channel = np.clip(llrs, -MESSAGE_CLAMP, MESSAGE_CLAMP)

    hard = (channel < 0).astype(np.uint8)
    decoded = _syndrome_ok(code, hard)
    iterations = np.zeros(batch, dtype=np.int64)
    iterations[~decoded] = max_iter
    active = np.nonzero(~decoded)[0]
    if active.size == 0 or max_iter == 0:
        return hard, decoded, iterations

    edge_vars = code.check_vars.ravel()
    flat = code._var_edges_flat
    v2c = channel[:, edge_vars].copy()

    for it in range(1, max_iter + 1):
        t = np.tanh(0.5 * v2c[active]).reshape(active.size, m, wr)
        # exclusive in-row product via prefix/suffix cumprods (exact with zeros)
        pre = np.ones_like(t)
        suf = np.ones_like(t)
        np.cumprod(t[:, :, :-1], axis=2, out=pre[:, :, 1:])
        np.cumprod(t[:, :, :0:-1], axis=2, out=suf[:, :, -2::-1])
        prod = np.clip(pre * suf, -_ATANH_GUARD, _ATANH_GUARD)
        c2v = np.clip(2.0 * np.arctanh(prod), -MESSAGE_CLAMP, MESSAGE_CLAMP)
        c2v = c2v.reshape(active.size, -1)

        incoming = c2v[:, flat].reshape(active.size, code.n, code.wc)
        posterior = channel[active] + incoming.sum(axis=2)
        outgoing = np.clip(posterior[:, :, None] - incoming, -MESSAGE_CLAMP, MESSAGE_CLAMP)
        scatter = np.empty_like(c2v)
        scatter[:, flat] = outgoing.reshape(active.size, -1)
        v2c[active] = scatter

        bits = (posterior < 0).astype(np.uint8)
        hard[active] = bits
        ok = _syndrome_ok(code, bits)
        if ok.any():
            settled = active[ok]
            decoded[settled] = True
            iterations[settled] = it
            active = active[~ok]
            if active.size == 0:
                break
    return hard, decoded, iterations


def decode(code: LdpcCode, llrs: np.ndarray, max_iter: int = DEFAULT_MAX_ITER) -> DecodeOutcome:
    """Decode one LLR vector; see ``decode_soft_batch`` for conventions."""
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.ndim != 1 or llrs.size != code.n:
        raise WrongLength(f"expected {code.n} LLR values, got shape {llrs.shape}")
    hard, decoded, iterations = decode_soft_batch(code, llrs[None, :], max_iter)
    if decoded[0]:
        return DecodeOutcome(DecodeStatus.DECODED, hard[0], int(iterations[0]))
    return DecodeOutcome(DecodeStatus.PARITY_FAIL, None, int(iterations[0]))


def to_alist(code: LdpcCode) -> str:
    """Serialize the parity structure in the standard alist text layout."""
    m = code.num_checks
    var_checks = np.sort(code.var_edges // code.wr, axis=1)
    out = io.StringIO()
    out.write(f"{code.n} {m}\n")
    out.write(f"{code.wc} {code.wr}\n")
    out.write(" ".join([str(code.wc)] * code.n) + "\n")
    out.write(" ".join([str(code.wr)] * m) + "\n")
    for v in range(code.n):
        out.write(" ".join(str(c + 1) for c in var_checks[v]) + "\n")
    for c in range(m):
        out.write(" ".join(str(v + 1) for v in code.check_vars[c]) + "\n")
    return out.getvalue()


def from_alist(text: str) -> LdpcCode:
    """Rebuild a regular code from alist text; re-derives the systematic encoder.

    Only regular codes are supported. The encoder derivation is deterministic
    given the adjacency, so a round trip reproduces encode/decode behavior
    exactly (the construction seed is not recoverable and is set to None).
    """
    tokens = text.split()
    if len(tokens) < 4:
        raise FormatError("alist: truncated header")
    pos = 0

    def take(count):
        nonlocal pos
        if pos + count > len(tokens):
            raise FormatError("alist: unexpected end of input")
        out = tokens[pos:pos + count]
        pos += count
        return [int(x) for x in out]

    n, m = take(2)
    wc, wr = take(2)
    col_deg = take(n)
    row_deg = take(m)
    if any(d != wc for d in col_deg) or any(d != wr for d in row_deg):
        raise FormatError("alist: only regular codes are supported")
    var_checks = np.array([take(wc) for _ in range(n)], dtype=np.int64) - 1
    adj = np.array([take(wr) for _ in range(m)], dtype=np.int64) - 1
    if pos != len(tokens):
        raise FormatError("alist: trailing tokens")
    if adj.min() < 0 or adj.max() >= n or var_checks.min() < 0 or var_checks.max() >= m:
        raise FormatError("alist: adjacency index out of range")
    # cross-check the two adjacency lists describe the same graph
    rebuilt = np.sort(np.argsort(adj.ravel(), kind="stable").reshape(n, wc) // wr, axis=1)
    if not np.array_equal(np.sort(var_checks, axis=1), rebuilt):
        raise FormatError("alist: column and row adjacency lists disagree")
    k = n - m
    _validate_parameters(n, k, wc, wr)
    adj = np.sort(adj, axis=1)
    sys_form = _systematic_form(_dense_from_adjacency(adj.astype(np.int32), n))
    if sys_form is None:
        raise ConstructionFailed("alist: parity matrix is rank deficient")
    solver, parity_pos, info_pos = sys_form
    return _assemble(n, k, wc, wr, None, adj.astype(np.int32), solver, parity_pos, info_pos)
