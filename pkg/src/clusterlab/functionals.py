"""Catalogue of cluster functionals.

A functional is evaluated on :class:`~clusterlab.core.BlockStats`, i.e. on
blocks already scaled so the threshold is 1. All built-ins vanish on blocks
without an exceedance. Functionals can be built from strings such as
``"length_pow(1.5)"`` or ``"tmax_pow(1)*ei"``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from clusterlab import rng as _rng
from clusterlab.core import BlockStats, Window, block_stats


class UnknownFunctional(KeyError):
    pass


@dataclass(frozen=True)
class ClusterFunctional:
    name: str
    gamma: float
    shift_invariant: bool
    bounded: bool
    vanishes_around_zero: bool
    rule: Callable[[BlockStats], np.ndarray] = field(repr=False, compare=False)
    # True when the value depends only on the 0/1 exceedance pattern
    pattern_only: bool = True
    # T_max-power type (T_max^gamma * G); needed by the rescaled estimators
    tmax_power: float | None = None
    base: "ClusterFunctional | None" = field(default=None, repr=False, compare=False)

    def __call__(self, stats: BlockStats) -> np.ndarray:
        if not self.pattern_only and stats.csum is None:
            raise ValueError(f"{self.name} needs block magnitudes, got a pattern-only simulation")
        return np.asarray(self.rule(stats), dtype=np.float64)

    def __mul__(self, other: "ClusterFunctional") -> "ClusterFunctional":
        return product(self, other)


def _ei(s):
    return (s.count > 0).astype(np.float64)


def _power(base, gamma):
    base = base.astype(np.float64)
    if gamma == 0:
        return (base > 0).astype(np.float64)
    return np.where(base > 0, base**gamma, 0.0)


def ei() -> ClusterFunctional:
    return ClusterFunctional("ei", 0.0, True, True, True, _ei)


def length_pow(gamma: float) -> ClusterFunctional:
    gamma = float(gamma)
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    return ClusterFunctional(
        f"length_pow({gamma:g})", gamma, True, gamma == 0, True,
        lambda s: _power(s.length, gamma),
    )


def length_gt(q: int) -> ClusterFunctional:
    q = int(q)
    return ClusterFunctional(
        f"length_gt({q})", 0.0, True, True, True,
        lambda s: ((s.count > 0) & (s.length > q)).astype(np.float64),
    )


def count_eq(m: int) -> ClusterFunctional:
    m = int(m)
    if m < 1:
        raise ValueError("count_eq needs m >= 1 to vanish around zero")
    return ClusterFunctional(
        f"count_eq({m})", 0.0, True, True, True, lambda s: (s.count == m).astype(np.float64)
    )


def count() -> ClusterFunctional:
    # N <= L, so gamma = 1 with C_H = 1
    return ClusterFunctional("count", 1.0, True, False, True, lambda s: s.count.astype(np.float64))


def sum_ind(eta: float) -> ClusterFunctional:
    eta = float(eta)
    if not eta > 0:
        raise ValueError("eta must be positive")

    def rule(s):
        return ((s.count > 0) & (s.csum > eta)).astype(np.float64)

    return ClusterFunctional(f"sum_ind({eta:g})", 0.0, True, True, True, rule, pattern_only=False)


def tmin() -> ClusterFunctional:
    return ClusterFunctional(
        "tmin", 1.0, False, False, True, lambda s: np.where(s.count > 0, s.first, 0).astype(np.float64)
    )


def tmax_pow(gamma: float, g: ClusterFunctional | None = None) -> ClusterFunctional:
    """T_max**gamma * G, evaluated at in-block (1-based) positions."""
    gamma = float(gamma)
    g = ei() if g is None else g
    if not g.bounded:
        raise ValueError("tmax_pow needs a bounded G")

    def rule(s):
        return _power(np.where(s.count > 0, s.last, 0), gamma) * g(s)

    name = f"tmax_pow({gamma:g})" if g.name == "ei" else f"tmax_pow({gamma:g})*{g.name}"
    return ClusterFunctional(
        name, gamma, gamma == 0 and g.shift_invariant, gamma == 0, True, rule,
        pattern_only=g.pattern_only, tmax_power=gamma, base=g,
    )


def product(h1: ClusterFunctional, h2: ClusterFunctional) -> ClusterFunctional:
    # T_max^gamma times a bounded G stays in the T_max-power family
    for a, b in ((h1, h2), (h2, h1)):
        if a.tmax_power is not None and a.base is not None and a.base.name == "ei" and b.bounded:
            return tmax_pow(a.tmax_power, b)
    return ClusterFunctional(
        f"{h1.name}*{h2.name}",
        h1.gamma + h2.gamma,
        h1.shift_invariant and h2.shift_invariant,
        h1.bounded and h2.bounded,
        h1.vanishes_around_zero or h2.vanishes_around_zero,
        lambda s: h1(s) * h2(s),
        pattern_only=h1.pattern_only and h2.pattern_only,
    )


_BUILDERS = {
    "ei": (ei, 0),
    "length": (lambda: length_pow(1.0), 0),
    "length_pow": (length_pow, 1),
    "length_gt": (length_gt, 1),
    "count_eq": (count_eq, 1),
    "count": (count, 0),
    "sum_ind": (sum_ind, 1),
    "tmin": (tmin, 0),
    "tmax_pow": (tmax_pow, 1),
}

_TERM = re.compile(r"^\s*([a-z_]+)\s*(?:\(\s*([^()]*?)\s*\))?\s*$")


def builtin(name: str, *args) -> ClusterFunctional:
    key = name.strip().lower()
    if key not in _BUILDERS:
        raise UnknownFunctional(f"unknown functional {name!r}")
    build, nargs = _BUILDERS[key]
    if len(args) != nargs:
        raise ValueError(f"{key} takes {nargs} argument(s), got {len(args)}")
    return build(*args)


def parse(spec: str) -> ClusterFunctional:
    """Build a functional from a config string, e.g. ``"tmax_pow(1)*ei"``."""
    terms = spec.split("*")
    out = None
    for term in terms:
        mt = _TERM.match(term)
        if not mt:
            raise UnknownFunctional(f"cannot parse functional {spec!r}")
        args = []
        if mt.group(2):
            for a in mt.group(2).split(","):
                v = float(a)
                args.append(int(v) if v.is_integer() and mt.group(1) in ("count_eq", "length_gt") else v)
        h = builtin(mt.group(1), *args)
        out = h if out is None else product(out, h)
    return out


def eval_functional(h: ClusterFunctional, block: Window, norm=None) -> float:
    """Value of ``h`` on a block already scaled to threshold 1."""
    norms = block.norms() if norm is None else block.norms(norm)
    if norms.shape[0] == 0:
        return 0.0
    return float(h(block_stats(norms, norms.shape[0], 1.0))[0])


@dataclass
class MembershipReport:
    name: str
    gamma: float
    passed: bool
    c_h: float
    violations: list = field(default_factory=list)

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        head = f"{self.name} in H({self.gamma:g}): {status}, C_H={self.c_h:.4g}"
        return "\n".join([head] + [f"  {v['check']}: {v['detail']}" for v in self.violations])


def _random_window(gen, length):
    x = gen.random(length) * 0.999
    k = gen.integers(1, max(2, length // 4) + 1)
    pos = gen.choice(length, size=min(k, length), replace=False)
    x[pos] = 1.0 + gen.pareto(1.0, pos.shape[0]) + 1e-9
    return x


def _eval_norms(h, x):
    return float(h(block_stats(x, x.shape[0], 1.0))[0])


def check_membership(h, gamma, trials, seed, check_shift=None, max_len=512) -> MembershipReport:
    """Randomised audit of vanishing, locality, growth and shift invariance.

    Windows mix sub-unit noise with isolated spikes above 1. ``C_H`` is the
    largest observed ``|H| / L**gamma``. Growth is flagged when that ratio
    keeps increasing with the window length scale.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    gen = _rng.stream(seed, _rng.AUDIT)
    check_shift = h.shift_invariant if check_shift is None else check_shift
    violations = []

    def fail(check, x, detail):
        if not any(v["check"] == check for v in violations):
            violations.append({"check": check, "detail": detail, "window": np.round(x, 6).tolist()})

    lengths = np.unique(np.geomspace(4, max_len, 6).astype(int))
    ratio_by_len = {}
    for t in range(trials):
        length = int(lengths[t % lengths.shape[0]])
        x = _random_window(gen, length)
        v = _eval_norms(h, x)
        # (ii) vanishing around zero
        quiet = gen.random(length) * 0.999
        if _eval_norms(h, quiet) != 0.0:
            fail("vanishes_around_zero", quiet, "nonzero value on a window without exceedances")
        # (iii) only coordinates between first and last exceedance matter
        idx = np.flatnonzero(x > 1.0)
        lo, hi = idx[0], idx[-1]
        y = x.copy()
        outside = np.r_[0:lo, hi + 1 : length]
        y[outside] = gen.random(outside.shape[0]) * 0.999
        if _eval_norms(h, y) != v:
            fail("locality", x, "value changed when sub-threshold values outside [T_min, T_max] changed")
        # (iv) growth bound against L**gamma
        L = hi - lo + 1
        ratio = abs(v) / L**gamma
        ratio_by_len[length] = max(ratio_by_len.get(length, 0.0), ratio)
        if check_shift:
            pad_l, pad_r = gen.integers(1, 16, size=2)
            z = np.concatenate([gen.random(pad_l) * 0.999, x, gen.random(pad_r) * 0.999])
            vz = _eval_norms(h, z)
            if not math.isclose(vz, v, rel_tol=1e-12, abs_tol=1e-12):
                fail("shift_invariance", x, f"value {v:g} became {vz:g} after padding by {int(pad_l)} on the left")
    c_h = max(ratio_by_len.values())
    ks = sorted(ratio_by_len)
    lo_r = max(ratio_by_len[k] for k in ks[: max(1, len(ks) // 3)])
    hi_r = max(ratio_by_len[k] for k in ks[-max(1, len(ks) // 3) :])
    if lo_r > 0 and hi_r > 4.0 * lo_r:
        fail("growth", np.zeros(0), f"|H|/L^{gamma:g} grows with window length ({lo_r:.3g} -> {hi_r:.3g})")
    return MembershipReport(h.name, float(gamma), not violations, float(c_h), violations)
