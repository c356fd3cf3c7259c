"""Exact ground truth for iid exceedance patterns.

Two independent routes:

* closed forms built from the first/last-jump decompositions
  (P(t(1)=i, t(N)=j) = w^2 (1-w)^{i-1} (1-w)^{r-j} for i < j and
  w (1-w)^{r-1} for i = j), evaluated as O(r) sums;
* brute-force enumeration of all 2^r Bernoulli(w) patterns.

All sums use ``math.fsum``.
"""

from __future__ import annotations

import math

import numpy as np

from clusterlab.core import BlockStats
from clusterlab.functionals import ClusterFunctional

MAX_ENUM_R = 24


def _check(r, w):
    if r < 1:
        raise ValueError("r must be >= 1")
    if not 0 < w < 1:
        raise ValueError("w must lie in (0, 1)")


def _pow1m(w, k):
    """(1 - w)**k for integer arrays k, accurate for tiny w."""
    return np.exp(np.asarray(k, dtype=np.float64) * math.log1p(-w))


def prob_any(r: int, w: float) -> float:
    return -math.expm1(r * math.log1p(-w))


def length_joint_pmf(r: int, w: float) -> np.ndarray:
    """P(L = i, A) for i = 1..r."""
    _check(r, w)
    i = np.arange(1, r + 1)
    out = (r - i + 1) * w * w * _pow1m(w, r - i)
    out[0] = r * w * _pow1m(w, r - 1)
    return out


def closed_form_length_pmf(r: int, w: float) -> np.ndarray:
    """P(L = i | A), i = 1..r (index 0 holds i = 1)."""
    return length_joint_pmf(r, w) / prob_any(r, w)


def length_moment(r: int, w: float, gamma: float) -> float:
    """E[L^gamma 1_A]."""
    i = np.arange(1, r + 1, dtype=np.float64)
    return math.fsum(i**gamma * length_joint_pmf(r, w))


def first_jump_moment(r: int, w: float, gamma: float) -> float:
    """E[t(1)^gamma 1_A] = sum_i i^gamma w (1-w)^{i-1}."""
    _check(r, w)
    i = np.arange(1, r + 1, dtype=np.float64)
    return math.fsum(i**gamma * w * _pow1m(w, i - 1))


def last_jump_moment(r: int, w: float, gamma: float) -> float:
    """E[t(N)^gamma 1_A] = sum_j j^gamma w (1-w)^{r-j}."""
    _check(r, w)
    j = np.arange(1, r + 1, dtype=np.float64)
    return math.fsum(j**gamma * w * _pow1m(w, r - j))


def joint_product_moment(r: int, w: float, g1: float, g2: float) -> float:
    """E[t(1)^g1 t(N)^g2 1_A] via the first/last-jump decomposition."""
    _check(r, w)
    i = np.arange(1, r + 1, dtype=np.float64)
    diag = math.fsum(i ** (g1 + g2) * w * _pow1m(w, r - 1))
    left = i**g1 * _pow1m(w, i - 1)
    # sum over i < j of left[i], for every j
    cum = np.concatenate([[0.0], np.cumsum(left)[:-1]])
    off = math.fsum(w * w * i**g2 * _pow1m(w, r - i) * cum)
    return diag + off


def joint_diff_moment(r: int, w: float, gamma: float) -> float:
    """E[(t(N) - t(1))_+^gamma 1_A]; pairs at distance d occur r - d times."""
    _check(r, w)
    d = np.arange(1, r, dtype=np.float64)
    return math.fsum(d**gamma * (r - d) * w * w * _pow1m(w, r - d - 1))


def _all_patterns(r):
    codes = np.arange(1 << r, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(r)[None, :]) & 1
    cnt = bits.sum(axis=1)
    has = cnt > 0
    first = np.where(has, bits.argmax(axis=1) + 1, 0)
    last = np.where(has, r - bits[:, ::-1].argmax(axis=1), 0)
    return BlockStats(r, cnt.astype(np.int64), first.astype(np.int64), last.astype(np.int64), None)


def pattern_stats(r: int) -> BlockStats:
    """Summaries of every 0/1 pattern of length r (pattern p has bit i for time i+1)."""
    if r > MAX_ENUM_R:
        raise ValueError(f"enumeration limited to r <= {MAX_ENUM_R}")
    return _all_patterns(r)


def pattern_weights(r: int, w: float, stats: BlockStats | None = None) -> np.ndarray:
    stats = pattern_stats(r) if stats is None else stats
    k = stats.count.astype(np.float64)
    return np.exp(k * math.log(w) + (r - k) * math.log1p(-w))


def enumerate_patterns(r: int, w: float, F) -> tuple[float, float]:
    """Exact (E[F 1_A], E[F | A]) by summing over all 2^r patterns.

    ``F`` is a pattern-only :class:`ClusterFunctional` or any callable on
    :class:`BlockStats`.
    """
    _check(r, w)
    if isinstance(F, ClusterFunctional) and not F.pattern_only:
        raise ValueError(f"{F.name} depends on magnitudes, not only on the pattern")
    st = pattern_stats(r)
    p = pattern_weights(r, w, st)
    v = np.asarray(F(st), dtype=np.float64) * (st.count > 0)
    e = math.fsum(v * p)
    pa = math.fsum(p[st.count > 0])
    return e, e / pa


def enumerated_length_pmf(r: int, w: float) -> np.ndarray:
    st = pattern_stats(r)
    p = pattern_weights(r, w, st)
    L = st.length
    has = st.count > 0
    pa = math.fsum(p[has])
    return np.array([math.fsum(p[has & (L == i)]) for i in range(1, r + 1)]) / pa


def _stat_targets(gamma):
    return {
        "length_small": 1.0,
        "length_large": 1.0 / ((gamma + 1) * (gamma + 2)),
        "first_jump": 1.0 / (gamma + 1),
    }


def moment_rate_table(r_list, w_rule, gamma: float):
    """Rows of exact iid rate statistics with their limits.

    ``w_rule`` is a float (fixed w), a callable r -> w, or a list of w
    aligned with ``r_list``. Each row is a dict with keys r, w, gamma,
    statistic, value, target, rel_err, r_pow_w (= r^{gamma+1} w).
    """
    rows = []
    targets = _stat_targets(gamma)
    for idx, r in enumerate(r_list):
        r = int(r)
        if callable(w_rule):
            w = float(w_rule(r))
        elif isinstance(w_rule, (list, tuple, np.ndarray)):
            w = float(w_rule[idx])
        else:
            w = float(w_rule)
        el = length_moment(r, w, gamma)
        vals = {
            "length_small": el / (r * w),
            "length_large": el / (r ** (gamma + 2) * w * w),
            "first_jump": first_jump_moment(r, w, gamma) / (r ** (gamma + 1) * w),
        }
        for name, v in vals.items():
            t = targets[name]
            rows.append({
                "r": r, "w": w, "gamma": float(gamma), "statistic": name,
                "value": v, "target": t, "rel_err": abs(v - t) / abs(t),
                "r_pow_w": r ** (gamma + 1) * w,
            })
    return rows
