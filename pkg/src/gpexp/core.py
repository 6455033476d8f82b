"""Finite-alphabet probability vocabulary and empirical-type machinery.

Conventions used across the package:

* all information quantities are in bits (log base 2),
* product alphabets are flattened row-major with axis priority
  s, then u, then x, then y (the s axis varies slowest),
* a "type" is an empirical distribution stored as integer counts with an
  explicit denominator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterator

import numpy as np

__all__ = [
    "SUM_TOL",
    "Mode",
    "Alphabet",
    "Distribution",
    "ConditionalDistribution",
    "SequenceType",
    "JointSystem",
    "auxiliary_alphabet",
    "empirical_type",
    "joint_empirical_type",
    "enumerate_types",
    "type_class_size",
    "log_type_class_size",
]

# Normalisation tolerance for probability vectors.
SUM_TOL = 1e-12


class Mode(str, Enum):
    """Decoder operating regime."""

    ERASURE = "erasure"
    LIST = "list"


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# basic containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Alphabet:
    """A finite alphabet identified only by its size; symbols are 0..size-1."""

    size: int

    def __post_init__(self) -> None:
        if not isinstance(self.size, (int, np.integer)) or self.size < 1:
            raise ValueError(f"alphabet size must be a positive integer, got {self.size!r}")

    def __len__(self) -> int:
        return self.size


def auxiliary_alphabet(x: Alphabet, s: Alphabet) -> Alphabet:
    """Default auxiliary alphabet for binning codes: |U| = |X||S| + 1."""
    return Alphabet(x.size * s.size + 1)


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability vector over a finite alphabet.

    Entries are nonnegative and sum to 1 within SUM_TOL.  The underlying
    array is copied and made read-only.
    """

    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.array(self.probs, dtype=np.float64, copy=True).reshape(-1)
        if p.size == 0:
            raise ValueError("empty probability vector")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite and nonnegative")
        s = float(p.sum())
        if abs(s - 1.0) > SUM_TOL:
            raise ValueError(f"probabilities sum to {s!r}, expected 1 within {SUM_TOL}")
        object.__setattr__(self, "probs", _freeze(p))

    @property
    def size(self) -> int:
        return self.probs.size

    def __len__(self) -> int:
        return self.probs.size


@dataclass(frozen=True, eq=False)
class ConditionalDistribution:
    """Row-stochastic matrix: one probability row per conditioning cell."""

    rows: np.ndarray

    def __post_init__(self) -> None:
        r = np.array(self.rows, dtype=np.float64, copy=True)
        if r.ndim != 2 or r.size == 0:
            raise ValueError("rows must form a nonempty 2-D matrix")
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise ValueError("probabilities must be finite and nonnegative")
        sums = r.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > SUM_TOL):
            bad = int(np.argmax(np.abs(sums - 1.0)))
            raise ValueError(f"row {bad} sums to {sums[bad]!r}, expected 1 within {SUM_TOL}")
        object.__setattr__(self, "rows", _freeze(r))

    @property
    def n_cells(self) -> int:
        return self.rows.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True, eq=False)
class SequenceType:
    """Empirical type: integer symbol counts for sequences of length n."""

    counts: np.ndarray
    n: int

    def __post_init__(self) -> None:
        c = np.array(self.counts, dtype=np.int64, copy=True).reshape(-1)
        if c.size == 0:
            raise ValueError("empty count vector")
        if np.any(c < 0):
            raise ValueError("counts must be nonnegative")
        if int(c.sum()) != self.n:
            raise ValueError(f"counts sum to {int(c.sum())}, expected n={self.n}")
        if self.n < 1:
            raise ValueError("n must be positive")
        object.__setattr__(self, "counts", _freeze(c))

    def distribution(self) -> Distribution:
        return Distribution(self.counts / self.n)

    def key(self) -> tuple[int, ...]:
        """Hashable identity of the type (counts as a tuple)."""
        return tuple(int(c) for c in self.counts)


@dataclass(frozen=True, eq=False)
class JointSystem:
    """Factored law over (S, U, X, Y): p_s * p_ux_given_s * p_y_given_xs.

    p_ux_given_s has one row per s over the flattened U*X product
    (u-major); p_y_given_xs has one row per flattened (s, x) cell
    (s-major) over Y.
    """

    p_s: Distribution
    p_ux_given_s: ConditionalDistribution
    p_y_given_xs: ConditionalDistribution
    n_u: int
    n_x: int

    def __post_init__(self) -> None:
        n_s = self.p_s.size
        if self.p_ux_given_s.n_cells != n_s:
            raise ValueError("p_ux_given_s must have one row per state symbol")
        if self.p_ux_given_s.n_symbols != self.n_u * self.n_x:
            raise ValueError("p_ux_given_s row width must be |U|*|X|")
        if self.p_y_given_xs.n_cells != n_s * self.n_x:
            raise ValueError("p_y_given_xs must have one row per (s, x) cell")

    @property
    def n_s(self) -> int:
        return self.p_s.size

    @property
    def n_y(self) -> int:
        return self.p_y_given_xs.n_symbols

    def joint(self) -> np.ndarray:
        """Dense joint law with axes (s, u, x, y)."""
        n_s, n_u, n_x, n_y = self.n_s, self.n_u, self.n_x, self.n_y
        ux = self.p_ux_given_s.rows.reshape(n_s, n_u, n_x)
        w = self.p_y_given_xs.rows.reshape(n_s, n_x, n_y)
        out = (
            self.p_s.probs[:, None, None, None]
            * ux[:, :, :, None]
            * w[:, None, :, :]
        )
        return out

    def joint_distribution(self) -> Distribution:
        """Joint law flattened s-major (s, u, x, y) as a Distribution."""
        return Distribution(self.joint().reshape(-1))


# ---------------------------------------------------------------------------
# empirical types
# ---------------------------------------------------------------------------


def _as_symbols(seq, alphabet: Alphabet) -> np.ndarray:
    a = np.asarray(seq, dtype=np.int64).reshape(-1)
    if a.size == 0:
        raise ValueError("empty sequence")
    if np.any(a < 0) or np.any(a >= alphabet.size):
        raise ValueError(f"symbol out of range for alphabet of size {alphabet.size}")
    return a


def empirical_type(seq, alphabet: Alphabet) -> SequenceType:
    """Type of a symbol sequence over the given alphabet."""
    a = _as_symbols(seq, alphabet)
    counts = np.bincount(a, minlength=alphabet.size)
    return SequenceType(counts, int(a.size))


def joint_empirical_type(seq_a, seq_b, alphabets: tuple[Alphabet, Alphabet]) -> SequenceType:
    """Joint type of two aligned sequences over the flattened product A*B.

    The first sequence is the major axis: cell index = a * |B| + b.
    """
    al_a, al_b = alphabets
    a = _as_symbols(seq_a, al_a)
    b = _as_symbols(seq_b, al_b)
    if a.size != b.size:
        raise ValueError("sequences must have equal length")
    flat = a * al_b.size + b
    counts = np.bincount(flat, minlength=al_a.size * al_b.size)
    return SequenceType(counts, int(a.size))


@lru_cache(maxsize=None)
def _compositions(total: int, parts: int) -> tuple[tuple[int, ...], ...]:
    if parts == 1:
        return ((total,),)
    out = []
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            out.append((first,) + rest)
    return tuple(out)


def enumerate_types(n: int, alphabet: Alphabet) -> Iterator[SequenceType]:
    """All types of length-n sequences, in ascending lexicographic count order."""
    if n < 1:
        raise ValueError("n must be positive")
    for counts in _compositions(n, alphabet.size):
        yield SequenceType(np.array(counts, dtype=np.int64), n)


def type_class_size(t: SequenceType) -> int:
    """Exact number of sequences with the given type (integer arithmetic)."""
    total = math.factorial(t.n)
    for c in t.counts:
        total //= math.factorial(int(c))
    return total


def log_type_class_size(t: SequenceType, asymptotic: bool = False) -> float:
    """log2 of the type-class size.

    Exact variant evaluates the integer multinomial coefficient; the
    asymptotic variant returns n * H(type) and is never silently
    substituted for the exact one.
    """
    if asymptotic:
        p = t.counts / t.n
        nz = p[p > 0]
        return float(t.n * -(nz * np.log2(nz)).sum())
    if t.n <= 64:
        return math.log2(type_class_size(t))
    # large n: accumulate log-factorials instead of building huge integers
    lg = math.lgamma(t.n + 1) - sum(math.lgamma(int(c) + 1) for c in t.counts)
    return lg / math.log(2.0)
