"""Random binning code with conditionally constant composition codewords.

The codebook stacks one sub-code per state type lambda.  A sub-code is an
L x M array of length-n auxiliary codewords drawn uniformly from the type
class induced by the quantized design conditional; column m is the bin of
message m, with depth L = ceil(2^{n(I*_US(lambda) + epsilon)}).

The decoder scores each message by the best empirical-information metric
over all codewords in its bins and declares every message whose score
clears the threshold against its strongest competitor.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import Alphabet, Mode, SequenceType, empirical_type, enumerate_types
from .info import mutual_information

__all__ = [
    "CodeParams",
    "LambdaDesign",
    "SubCode",
    "Codebook",
    "DecoderConfig",
    "DecodeKind",
    "DecodeOutput",
    "DecoderWorkspace",
    "quantize_design",
    "build_codebook",
    "encode",
    "metric",
    "decode",
    "check_unambiguous",
    "qualifier_counts",
    "codebook_to_bytes",
    "codebook_from_bytes",
    "save_codebook",
    "load_codebook",
]

_CODEBOOK_STREAM_TAG = 0x636F6465  # distinguishes codebook draws from trial draws
_MAX_TOTAL_SYMBOLS = 500_000_000  # resource guard for L*M*n


# ---------------------------------------------------------------------------
# parameters and quantized designs
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CodeParams:
    """Code geometry: blocklength, rate (bits), bin-depth slack, design law.

    design is indexed (s, u, x) and every design[s] sums to 1.  seed is the
    base entropy for codebook draws.
    """

    n: int
    rate: float
    epsilon: float
    design: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError("blocklength n must be a positive integer")
        if not (math.isfinite(self.rate) and self.rate >= 0.0):
            raise ValueError("rate must be finite and nonnegative")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0.0):
            raise ValueError("epsilon must be positive")
        d = np.array(self.design, dtype=np.float64, copy=True)
        if d.ndim != 3 or d.size == 0:
            raise ValueError("design must be a 3-D array indexed (s, u, x)")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ValueError("design entries must be finite and nonnegative")
        sums = d.sum(axis=(1, 2))
        if np.any(np.abs(sums - 1.0) > 1e-12):
            raise ValueError("every design[s] must sum to 1")
        d.flags.writeable = False
        object.__setattr__(self, "design", d)
        if not isinstance(self.seed, (int, np.integer)) or not (0 <= int(self.seed) < 2 ** 64):
            raise ValueError("seed must be an integer in [0, 2^64)")
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n_s(self) -> int:
        return self.design.shape[0]

    @property
    def n_u(self) -> int:
        return self.design.shape[1]

    @property
    def n_x(self) -> int:
        return self.design.shape[2]

    @property
    def n_messages(self) -> int:
        m = int(math.floor(2.0 ** (self.n * self.rate)))
        return max(m, 1)


def _tv_counts(p_row: np.ndarray, total: int) -> np.ndarray:
    """Integer counts summing to total minimizing total variation to p_row.

    Largest-remainder rounding; ties broken toward lower cell index.
    """
    t = p_row * total
    f = np.floor(t).astype(np.int64)
    short = total - int(f.sum())
    if short > 0:
        frac = t - f
        order = np.lexsort((np.arange(frac.size), -frac))
        f[order[:short]] += 1
    return f


@dataclass(frozen=True, eq=False)
class LambdaDesign:
    """Design conditional quantized against one state type.

    counts[s, u, x] are joint symbol counts at blocklength n; rows for
    state symbols with zero count are all-zero (unused conditioning cell).
    """

    state_counts: np.ndarray
    counts: np.ndarray
    n: int

    def __post_init__(self) -> None:
        sc = np.array(self.state_counts, dtype=np.int64, copy=True)
        c = np.array(self.counts, dtype=np.int64, copy=True)
        if c.ndim != 3 or sc.ndim != 1 or c.shape[0] != sc.size:
            raise ValueError("counts must be (|S|, |U|, |X|) with matching state_counts")
        if int(sc.sum()) != self.n or np.any(c.sum(axis=(1, 2)) != sc):
            raise ValueError("per-state counts must sum to the state type")
        sc.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "state_counts", sc)
        object.__setattr__(self, "counts", c)

    @property
    def u_counts_by_s(self) -> np.ndarray:
        return self.counts.sum(axis=2)

    @property
    def u_marginal(self) -> np.ndarray:
        return self.counts.sum(axis=(0, 2))

    @property
    def i_star(self) -> float:
        """I(U;S) of the quantized design joint type, in bits."""
        return mutual_information(self.u_counts_by_s / self.n)

    def n_rows(self, epsilon: float) -> int:
        """Bin depth L = ceil(2^{n (I*_US + epsilon)})."""
        return int(math.ceil(2.0 ** (self.n * (self.i_star + epsilon))))


def quantize_design(design: np.ndarray, state_type: SequenceType) -> LambdaDesign:
    """Round the design conditional to a joint type consistent with state_type.

    Each conditional row design[s] is rounded to counts with denominator
    state_type.counts[s] minimizing total variation; rows conditioned on
    zero-count state symbols are dropped (all-zero).
    """
    d = np.asarray(design, dtype=np.float64)
    if d.ndim != 3:
        raise ValueError("design must be indexed (s, u, x)")
    n_s, n_u, n_x = d.shape
    if state_type.counts.size != n_s:
        raise ValueError("state type does not match the design state alphabet")
    counts = np.zeros((n_s, n_u, n_x), dtype=np.int64)
    for s in range(n_s):
        c_s = int(state_type.counts[s])
        if c_s > 0:
            counts[s] = _tv_counts(d[s].reshape(-1), c_s).reshape(n_u, n_x)
    return LambdaDesign(state_counts=state_type.counts, counts=counts, n=state_type.n)


# ---------------------------------------------------------------------------
# codebook
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SubCode:
    """One stacked bin array: words[l, m] is the l-th codeword of message m+1."""

    design: LambdaDesign
    words: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.words, dtype=np.uint8, copy=True)
        if w.ndim != 3:
            raise ValueError("words must be (L, M, n)")
        if w.shape[2] != self.design.n:
            raise ValueError("codeword length must equal the blocklength")
        w.flags.writeable = False
        object.__setattr__(self, "words", w)

    @property
    def n_rows(self) -> int:
        return self.words.shape[0]


@dataclass(frozen=True, eq=False)
class Codebook:
    """Sub-codes for every state type of denominator n, keyed by type counts."""

    params: CodeParams
    sub_codes: dict[tuple[int, ...], SubCode]

    def sub_code_for(self, state_seq) -> SubCode:
        lam = empirical_type(state_seq, Alphabet(self.params.n_s))
        return self.sub_codes[lam.key()]


def build_codebook(params: CodeParams) -> Codebook:
    """Draw the full stacked codebook.

    Sub-codes are drawn independently per state type from streams keyed by
    (seed, tag, type index in lexicographic order), so the result does not
    depend on construction order.  Each codeword is an independent uniform
    draw from the type class of the quantized design's u marginal.
    """
    m_count = params.n_messages
    subs: dict[tuple[int, ...], SubCode] = {}
    for idx, lam in enumerate(enumerate_types(params.n, Alphabet(params.n_s))):
        qd = quantize_design(params.design, lam)
        rows = qd.n_rows(params.epsilon)
        total = rows * m_count * params.n
        if total > _MAX_TOTAL_SYMBOLS:
            raise ValueError(
                f"codebook too large ({total} symbols for state type {lam.key()}); "
                "reduce n, rate, epsilon or the design dependence I*_US"
            )
        rng = np.random.default_rng([params.seed, _CODEBOOK_STREAM_TAG, idx])
        base = np.repeat(np.arange(params.n_u, dtype=np.uint8), qd.u_marginal)
        words = rng.permuted(np.tile(base, (rows * m_count, 1)), axis=1)
        subs[lam.key()] = SubCode(design=qd, words=words.reshape(rows, m_count, params.n))
    return Codebook(params=params, sub_codes=subs)


# ---------------------------------------------------------------------------
# encoding
# ---------------------------------------------------------------------------


def encode(m: int, state_seq, codebook: Codebook, rng: np.random.Generator):
    """Two-step encoding of message m against the observed state sequence.

    Searches bin m of the matching sub-code for a codeword whose joint type
    with the state equals the quantized design; picks uniformly among hits.
    With no hit, a fresh u is drawn uniformly from the conditional type
    class and the trial is flagged (encoding_error=True).  The channel
    input x is then drawn uniformly from the conditional type class given
    (u, s).  Returns (u, x, encoding_error).
    """
    params = codebook.params
    s = np.asarray(state_seq, dtype=np.int64).reshape(-1)
    if s.size != params.n:
        raise ValueError("state sequence length must equal the blocklength")
    if not (1 <= m <= params.n_messages):
        raise ValueError(f"message must be in 1..{params.n_messages}")
    sub = codebook.sub_code_for(s)
    des = sub.design
    n_u, n_x = params.n_u, params.n_x
    active = np.flatnonzero(des.state_counts > 0)

    column = sub.words[:, m - 1, :]
    matches = np.ones(column.shape[0], dtype=bool)
    for a in active:
        pos = np.flatnonzero(s == a)
        seg = column[:, pos]
        want = des.u_counts_by_s[a]
        for u_val in range(n_u):
            matches &= (seg == u_val).sum(axis=1) == want[u_val]
    hits = np.flatnonzero(matches)
    if hits.size:
        u = column[hits[int(rng.integers(hits.size))]].copy()
        encoding_error = False
    else:
        u = np.empty(params.n, dtype=np.uint8)
        for a in active:
            pos = np.flatnonzero(s == a)
            mult = np.repeat(np.arange(n_u, dtype=np.uint8), des.u_counts_by_s[a])
            u[pos] = rng.permutation(mult)
        encoding_error = True

    x = np.empty(params.n, dtype=np.uint8)
    for a in active:
        for u_val in range(n_u):
            x_counts = des.counts[a, u_val]
            if x_counts.sum():
                pos = np.flatnonzero((s == a) & (u == u_val))
                x[pos] = rng.permutation(np.repeat(np.arange(n_x, dtype=np.uint8), x_counts))
    return u, x, encoding_error


# ---------------------------------------------------------------------------
# decoding
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DecoderConfig:
    """Threshold test parameters; the regime fixes the admissible ranges."""

    mode: Mode
    threshold: float
    alpha: float

    def __post_init__(self) -> None:
        mode = Mode(self.mode)
        object.__setattr__(self, "mode", mode)
        if not (math.isfinite(self.threshold) and math.isfinite(self.alpha)):
            raise ValueError("threshold and alpha must be finite")
        if mode is Mode.ERASURE:
            if self.alpha < 1.0 or self.threshold < 0.0:
                raise ValueError("erasure mode requires alpha >= 1 and threshold >= 0")
        else:
            if not (0.0 < self.alpha < 1.0):
                raise ValueError("list mode requires 0 < alpha < 1")


class DecodeKind(str, Enum):
    ERASED = "erased"
    DECODED = "decoded"
    LISTED = "listed"


@dataclass(frozen=True, eq=False)
class DecodeOutput:
    kind: DecodeKind
    message: int | None
    messages: frozenset[int]
    scores: np.ndarray


def metric(u, y, design: LambdaDesign, n_y: int | None = None) -> float:
    """Decoding metric: empirical I(u;y) minus the sub-code's I*_US, in bits."""
    u_arr = np.asarray(u, dtype=np.int64).reshape(-1)
    y_arr = np.asarray(y, dtype=np.int64).reshape(-1)
    if u_arr.size != y_arr.size:
        raise ValueError("u and y must have equal length")
    n_u = design.counts.shape[1]
    y_size = int(n_y) if n_y is not None else int(y_arr.max()) + 1
    joint = np.zeros((n_u, y_size), dtype=np.float64)
    np.add.at(joint, (u_arr, y_arr), 1.0 / u_arr.size)
    return mutual_information(joint) - design.i_star


class DecoderWorkspace:
    """Flattened view of a codebook for fast repeated decoding.

    All codewords are stacked in (message, state type, row) order; scores
    come from integer joint counts and a log2 lookup table, which keeps
    repeated decodes exact and deterministic.
    """

    def __init__(self, codebook: Codebook, n_y: int):
        params = codebook.params
        self.n = params.n
        self.n_y = int(n_y)
        self.n_messages = params.n_messages
        keys = sorted(codebook.sub_codes.keys())
        blocks = []
        istars = []
        for m_idx in range(self.n_messages):
            for key in keys:
                sub = codebook.sub_codes[key]
                blocks.append(sub.words[:, m_idx, :])
                istars.append(np.full(sub.n_rows, sub.design.i_star))
        self.words = np.ascontiguousarray(np.concatenate(blocks, axis=0))
        self.istar = np.concatenate(istars)
        rows_per_message = self.words.shape[0] // self.n_messages
        self.starts = np.arange(self.n_messages) * rows_per_message
        self.masks = [
            np.ascontiguousarray((self.words == u_val).astype(np.int32))
            for u_val in range(params.n_u)
        ]
        self.log_table = np.zeros(self.n + 1)
        self.log_table[1:] = np.log2(np.arange(1, self.n + 1))

    def scores(self, y) -> np.ndarray:
        """Best metric per message: S_m = max over the message's codewords."""
        y_arr = np.asarray(y, dtype=np.int64).reshape(-1)
        if y_arr.size != self.n:
            raise ValueError("received word length must equal the blocklength")
        onehot = np.zeros((self.n, self.n_y), dtype=np.int32)
        onehot[np.arange(self.n), y_arr] = 1
        counts = np.stack([mask @ onehot for mask in self.masks])  # (nU, R, nY)
        lt = self.log_table
        t_joint = (counts * lt[counts]).sum(axis=(0, 2))
        c_u = counts.sum(axis=2)
        t_u = (c_u * lt[c_u]).sum(axis=0)
        c_y = counts.sum(axis=0)
        t_y = (c_y * lt[c_y]).sum(axis=1)
        info = (t_joint - t_u - t_y) / self.n + lt[self.n]
        return np.maximum.reduceat(info - self.istar, self.starts)


def _qualifier_mask(scores: np.ndarray, threshold: float, alpha: float) -> np.ndarray:
    """m qualifies iff S_m > T + alpha * |max_{m' != m} S_m'|+ (clipped at 0)."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if s.size == 1:
        return np.array([s[0] > threshold])
    top = s.max()
    second = np.partition(s, s.size - 2)[s.size - 2]
    n_top = int((s == top).sum())
    competitor = np.where((s == top) & (n_top == 1), second, top)
    return s > threshold + alpha * np.maximum(competitor, 0.0)


def decode(y, codebook: Codebook, config: DecoderConfig,
           workspace: DecoderWorkspace | None = None,
           n_y: int | None = None) -> DecodeOutput:
    """Threshold decoding of a received word against the whole codebook.

    In erasure mode at most one message can qualify; none yields Erased.
    In list mode the output lists every qualifier (possibly none).
    """
    if workspace is None:
        y_arr = np.asarray(y, dtype=np.int64).reshape(-1)
        workspace = DecoderWorkspace(codebook, n_y=int(n_y) if n_y else int(y_arr.max()) + 1)
    scores = workspace.scores(y)
    mask = _qualifier_mask(scores, config.threshold, config.alpha)
    winners = np.flatnonzero(mask) + 1
    if config.mode is Mode.ERASURE:
        if winners.size == 0:
            return DecodeOutput(DecodeKind.ERASED, None, frozenset(), scores)
        if winners.size > 1:
            raise RuntimeError("erasure-mode invariant violated: multiple qualifiers")
        return DecodeOutput(DecodeKind.DECODED, int(winners[0]), frozenset({int(winners[0])}), scores)
    return DecodeOutput(DecodeKind.LISTED, None, frozenset(int(w) for w in winners), scores)


def check_unambiguous(scores, config: DecoderConfig) -> int:
    """Number of messages passing the threshold test for a score vector."""
    return int(_qualifier_mask(np.asarray(scores, dtype=np.float64),
                               config.threshold, config.alpha).sum())


def qualifier_counts(score_matrix, threshold: float, alpha: float) -> np.ndarray:
    """Vectorized check_unambiguous over rows of a (batch, M) score matrix."""
    s = np.asarray(score_matrix, dtype=np.float64)
    if s.ndim != 2:
        raise ValueError("score_matrix must be 2-D")
    if s.shape[1] == 1:
        return (s[:, 0] > threshold).astype(np.int64)
    top = s.max(axis=1, keepdims=True)
    second = np.partition(s, s.shape[1] - 2, axis=1)[:, s.shape[1] - 2: s.shape[1] - 1]
    n_top = (s == top).sum(axis=1, keepdims=True)
    competitor = np.where((s == top) & (n_top == 1), second, top)
    mask = s > threshold + alpha * np.maximum(competitor, 0.0)
    return mask.sum(axis=1).astype(np.int64)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_MAGIC = b"GPCB"
_VERSION = 1


def codebook_to_bytes(codebook: Codebook) -> bytes:
    """Versioned binary layout; loading then saving is byte-identical."""
    p = codebook.params
    out = bytearray()
    out += _MAGIC
    out += struct.pack("<H", _VERSION)
    out += struct.pack("<IIHHH", p.n, p.n_messages, p.n_s, p.n_u, p.n_x)
    out += struct.pack("<ddQ", p.rate, p.epsilon, p.seed)
    out += np.ascontiguousarray(p.design, dtype="<f8").tobytes()
    keys = sorted(codebook.sub_codes.keys())
    out += struct.pack("<I", len(keys))
    for key in keys:
        sub = codebook.sub_codes[key]
        out += struct.pack(f"<{p.n_s}I", *key)
        out += struct.pack("<I", sub.n_rows)
        out += sub.words.tobytes()
    return bytes(out)


def codebook_from_bytes(data: bytes) -> Codebook:
    if data[:4] != _MAGIC:
        raise ValueError("not a codebook stream")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported codebook version {version}")
    off = 6
    n, m_count, n_s, n_u, n_x = struct.unpack_from("<IIHHH", data, off)
    off += struct.calcsize("<IIHHH")
    rate, epsilon, seed = struct.unpack_from("<ddQ", data, off)
    off += struct.calcsize("<ddQ")
    design = np.frombuffer(data, dtype="<f8", count=n_s * n_u * n_x, offset=off)
    design = design.reshape(n_s, n_u, n_x)
    off += design.nbytes
    params = CodeParams(n=n, rate=rate, epsilon=epsilon, design=design, seed=seed)
    if params.n_messages != m_count:
        raise ValueError("stored message count does not match the rate")
    (n_subs,) = struct.unpack_from("<I", data, off)
    off += 4
    subs: dict[tuple[int, ...], SubCode] = {}
    for _ in range(n_subs):
        key = struct.unpack_from(f"<{n_s}I", data, off)
        off += 4 * n_s
        (rows,) = struct.unpack_from("<I", data, off)
        off += 4
        words = np.frombuffer(data, dtype=np.uint8, count=rows * m_count * n, offset=off)
        off += rows * m_count * n
        lam = SequenceType(np.array(key, dtype=np.int64), n)
        subs[lam.key()] = SubCode(
            design=quantize_design(params.design, lam),
            words=words.reshape(rows, m_count, n),
        )
    if off != len(data):
        raise ValueError("trailing bytes in codebook stream")
    return Codebook(params=params, sub_codes=subs)


def save_codebook(codebook: Codebook, path) -> None:
    with open(path, "wb") as fh:
        fh.write(codebook_to_bytes(codebook))


def load_codebook(path) -> Codebook:
    with open(path, "rb") as fh:
        return codebook_from_bytes(fh.read())
