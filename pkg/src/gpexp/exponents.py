"""Achievable error exponents for erasure and list decoding with side information.

Each exponent is an exhaustive min-max-min search over a type lattice with
denominator d: the adversarial state law P~_S ranges over the lattice on the
S-simplex, the design conditional P~_{UX|S} over independent lattice rows per
state symbol, and the test channel P~_{Y|XS} over independent lattice rows
per (s, x) cell.  Evaluation follows the written order (min over P~_S of the
max over P~_{UX|S} of the inner minima); no alternating heuristics.

All values are in bits.  E1 bounds the erasure / total-error event, E2 the
undetected-error event (erasure mode) or the expected number of incorrect
list entries (list mode, where the value may be negative).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

# keep the portable threading layer unless the user picked one; with it the
# partition-safety of the lattice loop does not depend on TBB/OpenMP versions
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

from numba import njit, prange

from .channel import Channel
from .core import ConditionalDistribution, Distribution, JointSystem, Mode
from .info import clip_plus, conditional_kl, j_functional, kl_divergence
from .lattice import simplex_lattice

__all__ = [
    "J_TOL",
    "ExponentQuery",
    "ExponentResult",
    "SweepPoint",
    "e1_erasure",
    "e2_erasure",
    "e1_list",
    "e2_list",
    "random_binning_exponent",
    "exponent_pair",
    "sweep",
    "inner_min",
    "objective_value",
    "clip_plus",
]

# Slack for the branch-1 constraint J <= T, so lattice points sitting exactly
# on the boundary are kept despite rounding.
J_TOL = 1e-12

_E1_BRANCH_CONSTRAINED = 1
_E1_BRANCH_PENALIZED = 2


# ---------------------------------------------------------------------------
# queries and results
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExponentQuery:
    """One exponent evaluation request.

    n_u=None derives the auxiliary alphabet size |X||S|+1; smaller values
    are allowed (they restrict the inner max, still a valid achievable
    bound) and are much faster.
    """

    channel: Channel
    rate: float
    threshold: float
    alpha: float
    mode: Mode
    lattice_denominator: int
    n_u: int | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.channel, Channel):
            raise ValueError("channel must be a Channel")
        if not (math.isfinite(self.rate) and self.rate >= 0.0):
            raise ValueError("rate must be finite and nonnegative")
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")
        if not math.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        mode = Mode(self.mode)
        object.__setattr__(self, "mode", mode)
        if mode is Mode.ERASURE:
            if self.alpha < 1.0 or self.threshold < 0.0:
                raise ValueError("erasure mode requires alpha >= 1 and threshold >= 0")
        else:
            if not (0.0 < self.alpha < 1.0):
                raise ValueError("list mode requires 0 < alpha < 1")
        if not isinstance(self.lattice_denominator, (int, np.integer)) or self.lattice_denominator < 2:
            raise ValueError("lattice denominator must be an integer >= 2")
        if self.n_u is not None and (not isinstance(self.n_u, (int, np.integer)) or self.n_u < 1):
            raise ValueError("n_u must be a positive integer when given")

    @property
    def n_u_resolved(self) -> int:
        if self.n_u is not None:
            return int(self.n_u)
        return self.channel.n_x * self.channel.n_s + 1


@dataclass(frozen=True, eq=False)
class ExponentResult:
    """Optimal lattice value plus the witness triple that attains it."""

    kind: str
    value: float
    witness: JointSystem
    branch: int | None
    lattice_denominator: int


@dataclass(frozen=True, eq=False)
class SweepPoint:
    axis_value: float
    e1: ExponentResult | None
    e2: ExponentResult | None
    error: str | None


# ---------------------------------------------------------------------------
# jitted kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _build_ctx(combo, active_s, rows_ux, ps, n_x, wz, qc, p_u):
    """Fill per-candidate tables for one P~_{UX|S} lattice combo.

    wz[cell, u] = P~(s, u, x) with cell = s*n_x + x; qc[cell] = P~(s, x);
    p_u = the u marginal.  Rows for zero-mass states are skipped (they
    cannot affect any objective).  Returns (I(U;S), H(U)).
    """
    n_u = p_u.shape[0]
    n_active = active_s.shape[0]
    n_rows = rows_ux.shape[0]
    stride = np.empty(n_active, np.int64)
    acc = np.int64(1)
    for j in range(n_active - 1, -1, -1):
        stride[j] = acc
        acc *= n_rows
    wz[:, :] = 0.0
    qc[:] = 0.0
    p_u[:] = 0.0
    rem = combo
    for j in range(n_active):
        idx = rem // stride[j]
        rem -= idx * stride[j]
        s = active_s[j]
        psv = ps[s]
        base = s * n_x
        for u in range(n_u):
            off = u * n_x
            for x in range(n_x):
                w = psv * rows_ux[idx, off + x]
                wz[base + x, u] = w
                qc[base + x] += w
                p_u[u] += w
    i_us = 0.0
    rem = combo
    for j in range(n_active):
        idx = rem // stride[j]
        rem -= idx * stride[j]
        s = active_s[j]
        psv = ps[s]
        for u in range(n_u):
            pus = 0.0
            off = u * n_x
            for x in range(n_x):
                pus += rows_ux[idx, off + x]
            pus *= psv
            if pus > 0.0:
                i_us += pus * math.log2(pus / (psv * p_u[u]))
    h_u = 0.0
    for u in range(n_u):
        if p_u[u] > 0.0:
            h_u -= p_u[u] * math.log2(p_u[u])
    return i_us, h_u


@njit(cache=True)
def _inner_scan(wz, qc, kl_cells, rows_y, d_s, i_us, h_u, thr, alpha, rate, j_tol):
    """Scan every P~_{Y|XS} lattice combo for one outer candidate.

    Returns per-objective minima with the first (lowest-index) achiever:
    (b1, b1_i, b2e, b2e_i, b2l, b2l_i, e2e, e2e_i, e2l, e2l_i) where b1 is
    the J <= thr constrained divergence branch, b2e/b2l the penalized
    branches of E1 (erasure uses the full divergence, list the conditional
    one), and e2e/e2l the E2 objectives.
    """
    n_cells, n_u = wz.shape
    n_rows, n_y = rows_y.shape
    n_combos = np.int64(1)
    for _ in range(n_cells):
        n_combos *= n_rows
    digits = np.zeros(n_cells, np.int64)
    p_uy = np.empty((n_u, n_y), np.float64)
    inf = np.inf
    b1 = inf
    b2e = inf
    b2l = inf
    e2e = inf
    e2l = inf
    b1_i = -1
    b2e_i = -1
    b2l_i = -1
    e2e_i = -1
    e2l_i = -1
    for ci in range(n_combos):
        d_y = 0.0
        for c in range(n_cells):
            q = qc[c]
            if q > 0.0:
                d_y += q * kl_cells[c, digits[c]]
        if d_y != inf:
            for u in range(n_u):
                for y in range(n_y):
                    p_uy[u, y] = 0.0
            for c in range(n_cells):
                r = digits[c]
                for u in range(n_u):
                    w = wz[c, u]
                    if w > 0.0:
                        for y in range(n_y):
                            p_uy[u, y] += w * rows_y[r, y]
            h_uy = 0.0
            h_y = 0.0
            for y in range(n_y):
                py = 0.0
                for u in range(n_u):
                    p = p_uy[u, y]
                    if p > 0.0:
                        h_uy -= p * math.log2(p)
                        py += p
                if py > 0.0:
                    h_y -= py * math.log2(py)
            jval = h_u + h_y - h_uy - i_us
            d_full = d_s + d_y
            if jval <= thr + j_tol and d_full < b1:
                b1 = d_full
                b1_i = ci
            pen = (jval - thr) / alpha - rate
            if pen < 0.0:
                pen = 0.0
            v = d_full + pen
            if v < b2e:
                b2e = v
                b2e_i = ci
            v = d_y + pen
            if v < b2l:
                b2l = v
                b2l_i = ci
            aj = jval if jval > 0.0 else 0.0
            pen = thr + alpha * aj - rate
            if pen < 0.0:
                pen = 0.0
            v = d_full + pen
            if v < e2e:
                e2e = v
                e2e_i = ci
            pen = thr + alpha * aj
            if pen < 0.0:
                pen = 0.0
            v = d_full + pen - rate
            if v < e2l:
                e2l = v
                e2l_i = ci
        c = n_cells - 1
        while c >= 0:
            digits[c] += 1
            if digits[c] < n_rows:
                break
            digits[c] = 0
            c -= 1
    return b1, b1_i, b2e, b2e_i, b2l, b2l_i, e2e, e2e_i, e2l, e2l_i


@njit(parallel=True, cache=True)
def _scan_all_ux(active_s, rows_ux, ps, n_cells, n_u, n_x, kl_cells, rows_y,
                 d_s, thr, alpha, rate, j_tol):
    """Objective values of every P~_{UX|S} combo for one P~_S candidate.

    Column order: e1_erasure, e2_erasure, e1_list, e2_list.  The loop is
    safe for data-parallel partitioning: each combo writes only its own
    row and the values do not depend on evaluation order.
    """
    n_active = active_s.shape[0]
    n_rows = rows_ux.shape[0]
    n_combos = np.int64(1)
    for _ in range(n_active):
        n_combos *= n_rows
    out = np.empty((n_combos, 4), np.float64)
    for k in prange(n_combos):
        combo = np.int64(k)  # the parfor-gufunc pipeline types k as float64
        wz = np.zeros((n_cells, n_u), np.float64)
        qc = np.zeros(n_cells, np.float64)
        p_u = np.zeros(n_u, np.float64)
        i_us, h_u = _build_ctx(combo, active_s, rows_ux, ps, n_x, wz, qc, p_u)
        b1, _, b2e, _, b2l, _, e2e, _, e2l, _ = _inner_scan(
            wz, qc, kl_cells, rows_y, d_s, i_us, h_u, thr, alpha, rate, j_tol)
        out[k, 0] = b1 if b1 <= b2e else b2e
        out[k, 1] = e2e
        out[k, 2] = b1 if b1 <= b2l else b2l
        out[k, 3] = e2l
    return out


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------

_KIND_COLUMN = {"e1_erasure": 0, "e2_erasure": 1, "e1_list": 2, "e2_list": 3}


def _apply_worker_env() -> None:
    raw = os.environ.get("GPEXP_WORKERS")
    if not raw:
        return
    try:
        want = int(raw)
    except ValueError:
        raise ValueError(f"GPEXP_WORKERS must be an integer, got {raw!r}")
    import numba

    limit = numba.config.NUMBA_NUM_THREADS
    numba.set_num_threads(max(1, min(want, limit)))


def _decode_combo(combo: int, n_digits: int, base: int) -> list[int]:
    digits = []
    for j in range(n_digits):
        p = base ** (n_digits - 1 - j)
        digits.append(int(combo // p))
        combo -= digits[-1] * p
    return digits


def _engine(query: ExponentQuery, kinds: Sequence[str]) -> dict[str, ExponentResult]:
    _apply_worker_env()
    ch = query.channel
    n_s, n_x, n_y = ch.n_s, ch.n_x, ch.n_y
    n_u = query.n_u_resolved
    d = int(query.lattice_denominator)
    n_cells = n_s * n_x

    rows_s = simplex_lattice(n_s, d)
    rows_ux = simplex_lattice(n_u * n_x, d)
    rows_y = simplex_lattice(n_y, d)

    kl_cells = np.empty((n_cells, rows_y.shape[0]), dtype=np.float64)
    for s in range(n_s):
        for x in range(n_x):
            for r in range(rows_y.shape[0]):
                kl_cells[s * n_x + x, r] = kl_divergence(rows_y[r], ch.w[x, s])

    thr, alpha, rate = float(query.threshold), float(query.alpha), float(query.rate)
    best: dict[str, tuple[float, int, int]] = {}
    for ips in range(rows_s.shape[0]):
        ps = rows_s[ips]
        active = np.flatnonzero(ps > 0.0).astype(np.int64)
        d_s = kl_divergence(ps, ch.p_s.probs)
        vals = _scan_all_ux(active, rows_ux, ps, n_cells, n_u, n_x, kl_cells,
                            rows_y, d_s, thr, alpha, rate, J_TOL)
        for kind in kinds:
            col = _KIND_COLUMN[kind]
            k = int(np.argmax(vals[:, col]))
            v = float(vals[k, col])
            if kind not in best or v < best[kind][0]:
                best[kind] = (v, ips, k)

    results: dict[str, ExponentResult] = {}
    for kind in kinds:
        v, ips, k = best[kind]
        ps = rows_s[ips]
        active = np.flatnonzero(ps > 0.0).astype(np.int64)
        d_s = kl_divergence(ps, ch.p_s.probs)
        wz = np.zeros((n_cells, n_u), np.float64)
        qc = np.zeros(n_cells, np.float64)
        p_u = np.zeros(n_u, np.float64)
        i_us, h_u = _build_ctx(k, active, rows_ux, ps, n_x, wz, qc, p_u)
        b1, b1_i, b2e, b2e_i, b2l, b2l_i, e2e, e2e_i, e2l, e2l_i = _inner_scan(
            wz, qc, kl_cells, rows_y, d_s, i_us, h_u, thr, alpha, rate, J_TOL)
        branch: int | None
        if kind == "e1_erasure":
            value, y_i, branch = (
                (b1, b1_i, _E1_BRANCH_CONSTRAINED) if b1 <= b2e else (b2e, b2e_i, _E1_BRANCH_PENALIZED)
            )
        elif kind == "e1_list":
            value, y_i, branch = (
                (b1, b1_i, _E1_BRANCH_CONSTRAINED) if b1 <= b2l else (b2l, b2l_i, _E1_BRANCH_PENALIZED)
            )
        elif kind == "e2_erasure":
            value, y_i, branch = e2e, e2e_i, None
        else:
            value, y_i, branch = e2l, e2l_i, None
        witness = _assemble_witness(ps, active, rows_ux, rows_y, k, y_i, n_s, n_u, n_x, n_cells)
        results[kind] = ExponentResult(
            kind=kind,
            value=float(value),
            witness=witness,
            branch=branch,
            lattice_denominator=d,
        )
    return results


def _assemble_witness(ps, active, rows_ux, rows_y, ux_combo, y_combo,
                      n_s, n_u, n_x, n_cells) -> JointSystem:
    """Reconstruct the witness triple from lattice indices.

    Rows attached to zero-mass conditioning cells are pinned to lattice
    index 0, the lexicographically smallest count vector, matching the
    tie-break rule.
    """
    ux_digits = _decode_combo(int(ux_combo), len(active), rows_ux.shape[0])
    ux_rows = np.tile(rows_ux[0], (n_s, 1))
    for j, s in enumerate(active):
        ux_rows[int(s)] = rows_ux[ux_digits[j]]
    if y_combo < 0:
        y_combo = 0
    y_digits = _decode_combo(int(y_combo), n_cells, rows_y.shape[0])
    y_rows = np.empty((n_cells, rows_y.shape[1]))
    for c in range(n_cells):
        y_rows[c] = rows_y[y_digits[c]]
    return JointSystem(
        p_s=Distribution(ps),
        p_ux_given_s=ConditionalDistribution(ux_rows),
        p_y_given_xs=ConditionalDistribution(y_rows),
        n_u=n_u,
        n_x=n_x,
    )


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def _single(query: ExponentQuery, kind: str, want_mode: Mode) -> ExponentResult:
    if query.mode is not want_mode:
        raise ValueError(f"{kind} requires mode={want_mode.value!r}")
    return _engine(query, [kind])[kind]


def e1_erasure(query: ExponentQuery) -> ExponentResult:
    """Exponent of the total error event Pr{E1} under erasure decoding."""
    return _single(query, "e1_erasure", Mode.ERASURE)


def e2_erasure(query: ExponentQuery) -> ExponentResult:
    """Exponent of the undetected error event Pr{E2} under erasure decoding."""
    return _single(query, "e2_erasure", Mode.ERASURE)


def e1_list(query: ExponentQuery) -> ExponentResult:
    """Exponent of the correct-message-missing event under list decoding."""
    return _single(query, "e1_list", Mode.LIST)


def e2_list(query: ExponentQuery) -> ExponentResult:
    """Exponent of the expected number of incorrect list entries (may be < 0)."""
    return _single(query, "e2_list", Mode.LIST)


def exponent_pair(query: ExponentQuery) -> tuple[ExponentResult, ExponentResult]:
    """Both exponents of the query's regime from a single lattice pass."""
    kinds = (
        ("e1_erasure", "e2_erasure") if query.mode is Mode.ERASURE else ("e1_list", "e2_list")
    )
    res = _engine(query, list(kinds))
    return res[kinds[0]], res[kinds[1]]


def random_binning_exponent(channel: Channel, rate: float, lattice_denominator: int,
                            n_u: int | None = None) -> ExponentResult:
    """Classical random-binning error exponent: the T=0, alpha=1 special case."""
    query = ExponentQuery(
        channel=channel,
        rate=rate,
        threshold=0.0,
        alpha=1.0,
        mode=Mode.ERASURE,
        lattice_denominator=lattice_denominator,
        n_u=n_u,
    )
    return e1_erasure(query)


def sweep(query: ExponentQuery, axis: str, grid: Iterable[float]) -> list[SweepPoint]:
    """Evaluate (E1, E2) along a parameter grid; bad points become error entries."""
    field = {"rate": "rate", "threshold": "threshold", "alpha": "alpha"}.get(axis)
    if field is None:
        raise ValueError(f"unknown sweep axis {axis!r}")
    values = [float(v) for v in grid]
    if not values:
        raise ValueError("sweep grid must be nonempty")
    kinds = (
        ["e1_erasure", "e2_erasure"] if query.mode is Mode.ERASURE else ["e1_list", "e2_list"]
    )
    points: list[SweepPoint] = []
    for v in values:
        try:
            q = replace(query, **{field: v})
            res = _engine(q, kinds)
            points.append(SweepPoint(axis_value=v, e1=res[kinds[0]], e2=res[kinds[1]], error=None))
        except ValueError as exc:
            points.append(SweepPoint(axis_value=v, e1=None, e2=None, error=str(exc)))
    return points


# ---------------------------------------------------------------------------
# direct evaluation helpers (used for witness audits and refinement checks)
# ---------------------------------------------------------------------------


def _witness_parts(query: ExponentQuery, witness: JointSystem):
    ch = query.channel
    if witness.n_s != ch.n_s or witness.n_x != ch.n_x or witness.n_y != ch.n_y:
        raise ValueError("witness alphabets do not match the channel")
    joint = witness.joint()
    d_s = kl_divergence(witness.p_s, ch.p_s)
    q_sx = joint.sum(axis=(1, 3)).reshape(-1)  # (s, x) weights, s-major
    w_rows = np.transpose(ch.w, (1, 0, 2)).reshape(ch.n_s * ch.n_x, ch.n_y)
    d_cond = conditional_kl(witness.p_y_given_xs, w_rows, q_sx)
    jv = j_functional(witness)
    return d_s, d_cond, jv


def objective_value(query: ExponentQuery, kind: str, witness: JointSystem,
                    branch: int | None = None) -> float:
    """Evaluate one objective directly at a witness triple (no lattice search)."""
    if kind not in _KIND_COLUMN:
        raise ValueError(f"unknown exponent kind {kind!r}")
    d_s, d_cond, jv = _witness_parts(query, witness)
    thr, alpha, rate = query.threshold, query.alpha, query.rate
    d_full = d_s + d_cond
    if kind in ("e1_erasure", "e1_list"):
        if branch not in (_E1_BRANCH_CONSTRAINED, _E1_BRANCH_PENALIZED):
            raise ValueError("E1 objectives need branch 1 or 2")
        if branch == _E1_BRANCH_CONSTRAINED:
            return d_full if jv <= thr + J_TOL else math.inf
        pen = clip_plus((jv - thr) / alpha - rate)
        return (d_full if kind == "e1_erasure" else d_cond) + pen
    if kind == "e2_erasure":
        return d_full + clip_plus(thr + alpha * clip_plus(jv) - rate)
    return d_full + clip_plus(thr + alpha * clip_plus(jv)) - rate


def inner_min(query: ExponentQuery, kind: str, p_s_tilde: Distribution,
              p_ux_given_s: ConditionalDistribution,
              lattice_denominator: int | None = None):
    """Minimum over lattice test channels at a fixed outer point.

    Returns (value, witness, branch).  The outer point need not lie on the
    lattice; only P~_{Y|XS} is searched.  Useful for refinement checks:
    enlarging the denominator can only lower this value.
    """
    if kind not in _KIND_COLUMN:
        raise ValueError(f"unknown exponent kind {kind!r}")
    ch = query.channel
    n_s, n_x, n_y = ch.n_s, ch.n_x, ch.n_y
    n_u = p_ux_given_s.n_symbols // n_x
    if n_u * n_x != p_ux_given_s.n_symbols or p_ux_given_s.n_cells != n_s:
        raise ValueError("p_ux_given_s shape does not match the channel")
    if p_s_tilde.size != n_s:
        raise ValueError("p_s_tilde does not match the state alphabet")
    d = int(lattice_denominator or query.lattice_denominator)
    rows_y = simplex_lattice(n_y, d)
    n_cells = n_s * n_x
    kl_cells = np.empty((n_cells, rows_y.shape[0]), dtype=np.float64)
    for s in range(n_s):
        for x in range(n_x):
            for r in range(rows_y.shape[0]):
                kl_cells[s * n_x + x, r] = kl_divergence(rows_y[r], ch.w[x, s])
    ps = p_s_tilde.probs
    ux3 = p_ux_given_s.rows.reshape(n_s, n_u, n_x)
    wz_3 = ps[:, None, None] * ux3  # (s, u, x)
    wz = np.ascontiguousarray(np.transpose(wz_3, (0, 2, 1)).reshape(n_cells, n_u))
    qc = np.ascontiguousarray(wz.sum(axis=1))
    p_u = wz_3.sum(axis=(0, 2))
    p_us = wz_3.sum(axis=2)  # (s, u)
    i_us = 0.0
    for s in range(n_s):
        for u in range(n_u):
            v = p_us[s, u]
            if v > 0.0:
                i_us += v * math.log2(v / (ps[s] * p_u[u]))
    h_u = float(-(p_u[p_u > 0] * np.log2(p_u[p_u > 0])).sum())
    d_s = kl_divergence(ps, ch.p_s.probs)
    b1, b1_i, b2e, b2e_i, b2l, b2l_i, e2e, e2e_i, e2l, e2l_i = _inner_scan(
        wz, qc, kl_cells, rows_y, d_s, i_us, h_u,
        float(query.threshold), float(query.alpha), float(query.rate), J_TOL)
    branch: int | None
    if kind == "e1_erasure":
        value, y_i, branch = (
            (b1, b1_i, _E1_BRANCH_CONSTRAINED) if b1 <= b2e else (b2e, b2e_i, _E1_BRANCH_PENALIZED)
        )
    elif kind == "e1_list":
        value, y_i, branch = (
            (b1, b1_i, _E1_BRANCH_CONSTRAINED) if b1 <= b2l else (b2l, b2l_i, _E1_BRANCH_PENALIZED)
        )
    elif kind == "e2_erasure":
        value, y_i, branch = e2e, e2e_i, None
    else:
        value, y_i, branch = e2l, e2l_i, None
    if y_i < 0:
        y_i = 0
    y_digits = _decode_combo(int(y_i), n_cells, rows_y.shape[0])
    y_rows = np.empty((n_cells, n_y))
    for c in range(n_cells):
        y_rows[c] = rows_y[y_digits[c]]
    witness = JointSystem(
        p_s=p_s_tilde,
        p_ux_given_s=p_ux_given_s,
        p_y_given_xs=ConditionalDistribution(y_rows),
        n_u=n_u,
        n_x=n_x,
    )
    return float(value), witness, branch
