"""Information measures in bits, with exact handling of zero mass.

Conventions: 0*log(0) = 0 everywhere; KL divergence is +inf as soon as the
first argument puts mass where the second has none.
"""

from __future__ import annotations

import math

import numpy as np

from .core import ConditionalDistribution, Distribution, JointSystem

__all__ = [
    "clip_plus",
    "entropy",
    "mutual_information",
    "kl_divergence",
    "conditional_kl",
    "j_functional",
    "i_star_us",
]


def clip_plus(t: float) -> float:
    """|t|+ = max(0, t).  -inf clips to 0; +inf stays +inf; nan rejected."""
    if math.isnan(t):
        raise ValueError("clip_plus undefined for nan")
    return t if t > 0.0 else 0.0


def _vec(p) -> np.ndarray:
    if isinstance(p, Distribution):
        return p.probs
    return np.asarray(p, dtype=np.float64).reshape(-1)


def _mat(p) -> np.ndarray:
    if isinstance(p, ConditionalDistribution):
        return p.rows
    a = np.asarray(p, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a 2-D row-stochastic matrix")
    return a


def entropy(p) -> float:
    """Shannon entropy H(p) in bits."""
    v = _vec(p)
    nz = v[v > 0]
    return float(-(nz * np.log2(nz)).sum())


def mutual_information(joint, shape: tuple[int, int] | None = None) -> float:
    """I(A;B) in bits from a joint law over A x B.

    Accepts a 2-D array directly, or a flat Distribution/vector plus the
    (|A|, |B|) shape.
    """
    if isinstance(joint, Distribution):
        j = joint.probs
    else:
        j = np.asarray(joint, dtype=np.float64)
    if j.ndim == 1:
        if shape is None:
            raise ValueError("flat joint requires an explicit (|A|, |B|) shape")
        j = j.reshape(shape)
    elif j.ndim != 2:
        raise ValueError("joint must be 1-D with shape or 2-D")
    pa = j.sum(axis=1)
    pb = j.sum(axis=0)
    return entropy(pa) + entropy(pb) - entropy(j.reshape(-1))


def kl_divergence(p, q) -> float:
    """D(p||q) in bits; +inf when p puts mass outside supp(q)."""
    pv, qv = _vec(p), _vec(q)
    if pv.size != qv.size:
        raise ValueError("mismatched alphabet sizes")
    total = 0.0
    for pi, qi in zip(pv.tolist(), qv.tolist()):
        if pi > 0.0:
            if qi <= 0.0:
                return math.inf
            total += pi * math.log2(pi / qi)
    return total


def conditional_kl(p_cond, q_cond, weights) -> float:
    """D(p||q | w) = sum_c w(c) D(p_c || q_c), rows paired by cell."""
    pm, qm = _mat(p_cond), _mat(q_cond)
    wv = _vec(weights)
    if pm.shape != qm.shape:
        raise ValueError("conditionals must have identical shape")
    if wv.size != pm.shape[0]:
        raise ValueError("one weight per conditioning cell required")
    total = 0.0
    for c in range(pm.shape[0]):
        w = float(wv[c])
        if w > 0.0:
            d = kl_divergence(pm[c], qm[c])
            if d == math.inf:
                return math.inf
            total += w * d
    return total


def j_functional(system: JointSystem) -> float:
    """J = I(U;Y) - I(U;S) of the factored law (bits)."""
    joint = system.joint()  # axes (s, u, x, y)
    p_uy = joint.sum(axis=(0, 2))  # (u, y)
    p_us = joint.sum(axis=(2, 3)).T  # (u, s)
    return mutual_information(p_uy) - mutual_information(p_us)


def i_star_us(p_s, p_u_given_s) -> float:
    """I(U;S) under state law p_s and conditional p(u|s) (bits)."""
    ps = _vec(p_s)
    rows = _mat(p_u_given_s)
    if rows.shape[0] != ps.size:
        raise ValueError("one conditional row per state symbol required")
    joint = ps[:, None] * rows  # (s, u)
    return mutual_information(joint)
