"""Monte Carlo trials of the binning code and threshold decoder.

Each trial draws a message, an iid state sequence, the encoder's internal
randomness and the channel noise from a dedicated stream keyed by
(seed, tag, trial index), so any subset of trials can be reproduced
independently of the rest.  Codebooks are refreshed every codebook_batch
trials from streams keyed by (code seed, tag, batch index); with
codebook_batch=None a single codebook is shared by all trials.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .channel import Channel
from .codec import (
    Codebook,
    CodeParams,
    DecodeKind,
    DecoderConfig,
    DecoderWorkspace,
    build_codebook,
    decode,
    encode,
)
from .core import Mode

__all__ = [
    "TrialConfig",
    "SimStats",
    "TrialRecords",
    "ExponentEstimate",
    "ComparisonEntry",
    "ComparisonReport",
    "run_trials",
    "empirical_exponent",
    "default_slack",
    "compare_to_bound",
]

_TRIAL_STREAM_TAG = 0x7472616C  # per-trial draws
_BATCH_STREAM_TAG = 0x62617463  # per-batch codebook seeds


@dataclass(frozen=True, eq=False)
class TrialConfig:
    """One simulation campaign: channel, code, decoder, trial budget."""

    channel: Channel
    code: CodeParams
    decoder: DecoderConfig
    trials: int
    seed: int
    message_policy: str = "fixed"
    codebook_batch: int | None = 1000

    def __post_init__(self) -> None:
        if self.channel.n_x != self.code.n_x or self.channel.n_s != self.code.n_s:
            raise ValueError("channel and code alphabets do not match")
        if not isinstance(self.trials, (int, np.integer)) or self.trials < 1:
            raise ValueError("trials must be a positive integer")
        object.__setattr__(self, "trials", int(self.trials))
        if not isinstance(self.seed, (int, np.integer)) or not (0 <= int(self.seed) < 2 ** 64):
            raise ValueError("seed must be an integer in [0, 2^64)")
        object.__setattr__(self, "seed", int(self.seed))
        if self.message_policy not in ("fixed", "uniform"):
            raise ValueError("message_policy must be 'fixed' or 'uniform'")
        if self.codebook_batch is not None:
            if not isinstance(self.codebook_batch, (int, np.integer)) or self.codebook_batch < 1:
                raise ValueError("codebook_batch must be a positive integer or None")
            object.__setattr__(self, "codebook_batch", int(self.codebook_batch))


@dataclass(frozen=True)
class SimStats:
    """Raw counts over a campaign.

    count_e1 counts trials whose outcome misses the sent message (erasure
    mode: anything but decoding it; list mode: its absence from the list);
    encoding fallbacks are always included.  count_e2 counts undetected
    errors (erasure mode only).  sum_incorrect_list accumulates the number
    of wrong messages on the list (list mode only).
    """

    n_trials: int
    count_e1: int
    count_e2: int
    sum_incorrect_list: int
    count_erased: int
    count_encoding_error: int


@dataclass(frozen=True, eq=False)
class TrialRecords:
    """Per-trial arrays for replaying decisions under other thresholds."""

    messages: np.ndarray
    encoding_errors: np.ndarray
    scores: np.ndarray


def _batch_code(code: CodeParams, batch: int) -> CodeParams:
    ss = np.random.SeedSequence([code.seed, _BATCH_STREAM_TAG, batch])
    return dataclasses.replace(code, seed=int(ss.generate_state(1, np.uint64)[0]))


def run_trials(config: TrialConfig, record: bool = False):
    """Run the campaign; returns SimStats, or (SimStats, TrialRecords).

    Per-trial draw order from the trial's stream: message (uniform policy
    only), state sequence, encoder randomness, channel noise.
    """
    ch = config.channel
    code = config.code
    m_count = code.n_messages
    n = code.n
    cdf = np.cumsum(ch.w, axis=2)
    erasure = config.decoder.mode is Mode.ERASURE

    e1 = e2 = erased = enc_errors = 0
    incorrect = 0
    if record:
        rec_m = np.empty(config.trials, dtype=np.int64)
        rec_err = np.empty(config.trials, dtype=bool)
        rec_scores = np.empty((config.trials, m_count))

    workspace = None
    current_batch = -1
    codebook: Codebook | None = None
    for t in range(config.trials):
        batch = 0 if config.codebook_batch is None else t // config.codebook_batch
        if codebook is None or batch != current_batch:
            params = code if config.codebook_batch is None else _batch_code(code, batch)
            codebook = build_codebook(params)
            workspace = DecoderWorkspace(codebook, n_y=ch.n_y)
            current_batch = batch

        rng = np.random.default_rng([config.seed, _TRIAL_STREAM_TAG, t])
        if config.message_policy == "uniform":
            m = int(rng.integers(m_count)) + 1
        else:
            m = 1
        s = rng.choice(ch.n_s, size=n, p=ch.p_s.probs)
        u, x, enc_err = encode(m, s, codebook, rng)
        noise = rng.random(n)
        y = np.minimum((noise[:, None] >= cdf[x, s]).sum(axis=1), ch.n_y - 1)

        out = decode(y, codebook, config.decoder, workspace=workspace)
        enc_errors += enc_err
        if erasure:
            hit = out.kind is DecodeKind.DECODED and out.message == m
            e1 += enc_err or not hit
            e2 += out.kind is DecodeKind.DECODED and out.message != m
            erased += out.kind is DecodeKind.ERASED
        else:
            e1 += enc_err or m not in out.messages
            incorrect += len(out.messages - {m})
            erased += not out.messages
        if record:
            rec_m[t] = m
            rec_err[t] = enc_err
            rec_scores[t] = out.scores

    stats = SimStats(
        n_trials=config.trials,
        count_e1=int(e1),
        count_e2=int(e2),
        sum_incorrect_list=int(incorrect),
        count_erased=int(erased),
        count_encoding_error=int(enc_errors),
    )
    if record:
        return stats, TrialRecords(messages=rec_m, encoding_errors=rec_err, scores=rec_scores)
    return stats


# ---------------------------------------------------------------------------
# empirical exponents and comparison against computed bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentEstimate:
    """Exponent read off a count: point = -(1/n) log2(count / trials).

    A zero count censors the point estimate; floor then carries the
    rule-of-three bound -(1/n) log2(3 / trials), a ~95% confidence floor.
    For positive counts floor equals the point estimate.
    """

    count: float
    trials: int
    n: int
    point: float
    floor: float
    censored: bool


def empirical_exponent(count: float, trials: int, n: int) -> ExponentEstimate:
    if trials < 1 or n < 1:
        raise ValueError("trials and n must be positive")
    if count < 0:
        raise ValueError("count must be nonnegative")
    if count == 0:
        floor = -math.log2(3.0 / trials) / n
        return ExponentEstimate(count=0.0, trials=trials, n=n,
                                point=math.inf, floor=floor, censored=True)
    point = -math.log2(count / trials) / n
    return ExponentEstimate(count=float(count), trials=trials, n=n,
                            point=point, floor=point, censored=False)


def default_slack(n: int, n_u: int, n_s: int, n_x: int, n_y: int) -> float:
    """Finite-blocklength allowance: (|U||S||X||Y|) log2(n+1) / n."""
    return n_u * n_s * n_x * n_y * math.log2(n + 1) / n


@dataclass(frozen=True)
class ComparisonEntry:
    name: str
    bound: float
    slack: float
    estimate: ExponentEstimate
    passed: bool


@dataclass(frozen=True)
class ComparisonReport:
    entries: tuple[ComparisonEntry, ...]
    passed: bool

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "entries": [
                {
                    "name": e.name,
                    "bound": e.bound,
                    "slack": e.slack,
                    "passed": e.passed,
                    "count": e.estimate.count,
                    "trials": e.estimate.trials,
                    "point": None if math.isinf(e.estimate.point) else e.estimate.point,
                    "floor": e.estimate.floor,
                    "censored": e.estimate.censored,
                }
                for e in self.entries
            ],
        }


def compare_to_bound(stats: SimStats, mode: Mode, n: int,
                     e1_bound: float, e2_bound: float,
                     n_u: int, n_s: int, n_x: int, n_y: int,
                     slack: float | None = None) -> ComparisonReport:
    """Check measured exponents against computed bounds minus a slack.

    An entry passes when its floor estimate is at least bound - slack.  In
    list mode the second quantity is the mean number of wrong listed
    messages (which may exceed 1, so its exponent may be negative).
    """
    mode = Mode(mode)
    if slack is None:
        slack = default_slack(n, n_u, n_s, n_x, n_y)
    e1_est = empirical_exponent(stats.count_e1, stats.n_trials, n)
    second_count = stats.count_e2 if mode is Mode.ERASURE else stats.sum_incorrect_list
    e2_est = empirical_exponent(second_count, stats.n_trials, n)
    entries = (
        ComparisonEntry("e1", e1_bound, slack, e1_est,
                        e1_est.floor >= e1_bound - slack - 1e-12),
        ComparisonEntry("e2", e2_bound, slack, e2_est,
                        e2_est.floor >= e2_bound - slack - 1e-12),
    )
    return ComparisonReport(entries=entries, passed=all(e.passed for e in entries))
