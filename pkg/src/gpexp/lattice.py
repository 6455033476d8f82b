"""Simplex lattice grids: all probability vectors with a fixed denominator."""

from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np

__all__ = ["simplex_lattice_counts", "simplex_lattice", "lattice_point_count"]


def lattice_point_count(k: int, d: int) -> int:
    """Number of lattice points on the k-simplex with denominator d."""
    return comb(d + k - 1, k - 1)


@lru_cache(maxsize=None)
def simplex_lattice_counts(k: int, d: int) -> np.ndarray:
    """Integer count vectors (rows) summing to d, ascending lexicographic order.

    The returned array is cached and read-only.
    """
    if k < 1 or d < 1:
        raise ValueError("need k >= 1 and d >= 1")
    rows = np.zeros((lattice_point_count(k, d), k), dtype=np.int64)
    idx = 0

    def fill(pos: int, remaining: int, prefix: list[int]) -> None:
        nonlocal idx
        if pos == k - 1:
            rows[idx, :-1] = prefix
            rows[idx, -1] = remaining
            idx += 1
            return
        for first in range(remaining + 1):
            fill(pos + 1, remaining - first, prefix + [first])

    fill(0, d, [])
    rows.flags.writeable = False
    return rows


@lru_cache(maxsize=None)
def simplex_lattice(k: int, d: int) -> np.ndarray:
    """Lattice points as probability rows (counts / d), cached and read-only."""
    probs = simplex_lattice_counts(k, d) / d
    probs.flags.writeable = False
    return probs
