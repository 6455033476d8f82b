"""State-dependent memoryless channel: transition law W(y|x,s) plus state source."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SUM_TOL, Distribution

__all__ = ["Channel"]


@dataclass(frozen=True, eq=False)
class Channel:
    """W(y|x,s) stored as an array indexed (x, s, y), with state law p_s."""

    w: np.ndarray
    p_s: Distribution

    def __post_init__(self) -> None:
        w = np.array(self.w, dtype=np.float64, copy=True)
        if w.ndim != 3 or w.size == 0:
            raise ValueError("w must be a nonempty 3-D array indexed (x, s, y)")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("transition probabilities must be finite and nonnegative")
        sums = w.sum(axis=2)
        if np.any(np.abs(sums - 1.0) > SUM_TOL):
            raise ValueError("every W(.|x,s) row must sum to 1")
        if not isinstance(self.p_s, Distribution):
            object.__setattr__(self, "p_s", Distribution(self.p_s))
        if w.shape[1] != self.p_s.size:
            raise ValueError("state axis of w must match p_s")
        w.flags.writeable = False
        object.__setattr__(self, "w", w)

    @property
    def n_x(self) -> int:
        return self.w.shape[0]

    @property
    def n_s(self) -> int:
        return self.w.shape[1]

    @property
    def n_y(self) -> int:
        return self.w.shape[2]
