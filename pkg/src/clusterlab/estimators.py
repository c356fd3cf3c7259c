"""Blocks estimators and Monte Carlo block measures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from clusterlab import rng as _rng
from clusterlab.core import (
    BlockScheme,
    BlockStats,
    FixedLevel,
    OrderStatistic,
    _norms_of,
    block_stats,
    resolve_threshold,
)
from clusterlab.functionals import ClusterFunctional, ei, tmax_pow

NORMALIZATIONS = ("rw", "r_pow_w", "r_pow_w2", "nw", "n_rpow_w")


@dataclass
class MCEstimate:
    value: float
    std_error: float
    n_rep: int
    seed: int
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_sums(cls, s, s2, n, seed, scale=1.0):
        mean = s / n
        var = max(s2 / n - mean * mean, 0.0) * n / max(n - 1, 1)
        return cls(mean / scale, math.sqrt(var / n) / scale, int(n), int(seed))

    def as_dict(self):
        return {"value": self.value, "se": self.std_error, "n_rep": self.n_rep, "seed": self.seed, **self.extra}


def normalization(kind: str, r: int, w: float, gamma: float = 0.0, n: int | None = None) -> float:
    if kind not in NORMALIZATIONS:
        raise ValueError(f"unknown normalization {kind!r}")
    if not (r >= 1 and 0 < w < 1):
        raise ValueError("normalization needs r >= 1 and 0 < w < 1")
    if kind == "rw":
        return r * w
    if kind == "r_pow_w":
        return r ** (gamma + 1) * w
    if kind == "r_pow_w2":
        return r ** (gamma + 2) * w * w
    if n is None or n < 1:
        raise ValueError(f"{kind} needs n")
    if kind == "nw":
        return n * w
    return n * r**gamma * w


def _use_fast_path(model, H=None):
    return model.kind == "iid_pareto" and (H is None or H.pattern_only)


def simulate_block_stats(model, r: int, u: float, count: int, gen: np.random.Generator) -> BlockStats:
    """Summaries of ``count`` independent simulated blocks of length r."""
    from clusterlab.generators import sample_blocks

    parts = []
    batch = max(1, (1 << 22) // r)
    for start in range(0, count, batch):
        size = min(batch, count - start)
        x = sample_blocks(model, r, size, gen)
        parts.append(block_stats(x.ravel(), r, u))
    return BlockStats.concat(parts, r=r)


def block_cluster_measure(model, H: ClusterFunctional, r: int, u: float, n_rep: int,
                          normalization_kind: str = "rw", seed: int = 0, gamma: float | None = None) -> MCEstimate:
    """Mean of H(u^-1 block) over n_rep independent blocks, divided by a normalization."""
    from clusterlab.generators import iid_exceeding_stats

    w = model.tail_prob(u)
    g = H.gamma if gamma is None else gamma
    norm = normalization(normalization_kind, r, w, g)
    gen = _rng.stream(seed, _rng.BLOCKS)
    if _use_fast_path(model, H):
        # only blocks with an exceedance contribute
        p_a = -math.expm1(r * math.log1p(-w))
        k = int(gen.binomial(n_rep, p_a))
        v = H(iid_exceeding_stats(w, r, k, gen)) if k else np.zeros(0)
    else:
        v = H(simulate_block_stats(model, r, u, n_rep, gen))
    est = MCEstimate.from_sums(math.fsum(v), math.fsum(v * v), n_rep, seed, scale=norm)
    est.extra = {"normalization": normalization_kind, "norm_value": norm, "w": w, "r_w": r * w}
    return est


def _conditional_stats(model, r, u, n_rep, seed, max_blocks=None):
    """Summaries of n_rep blocks that contain an exceedance."""
    from clusterlab.generators import iid_exceeding_stats

    w = model.tail_prob(u)
    gen = _rng.stream(seed, _rng.BLOCKS)
    if _use_fast_path(model):
        return iid_exceeding_stats(w, r, n_rep, gen)
    p_a = min(1.0, r * w)
    max_blocks = max_blocks or int(50 * n_rep / p_a) + 1000
    got, drawn = [], 0
    have = 0
    while have < n_rep:
        if drawn >= max_blocks:
            raise ValueError(f"only {have} exceeding blocks in {drawn} draws; raise u or r")
        size = int(min(max_blocks - drawn, max(1024, 1.5 * (n_rep - have) / p_a)))
        st = simulate_block_stats(model, r, u, size, gen)
        drawn += size
        st = st.take(st.has)
        got.append(st)
        have += len(st)
    return BlockStats.concat(got, r=r).take(slice(0, n_rep))


@dataclass
class JumpLaw:
    r: int
    first: np.ndarray  # t(1)/r given A
    last: np.ndarray  # t(N)/r given A
    ks_first: float
    ks_last: float

    def ecdf(self, which="first", grid=None):
        grid = np.linspace(0, 1, 101) if grid is None else grid
        x = np.sort(self.first if which == "first" else self.last)
        return grid, np.searchsorted(x, grid, side="right") / x.shape[0]


def jump_time_law(model, r: int, u: float, n_rep: int, seed: int) -> JumpLaw:
    """Conditional samples of t(1)/r and t(N)/r given A, with KS distance to U(0,1)."""
    st = _conditional_stats(model, r, u, n_rep, seed)
    if len(st) == 0:
        raise ValueError("no exceeding blocks")
    f = st.first / r
    l = st.last / r
    return JumpLaw(r, f, l, float(sps.kstest(f, "uniform").statistic), float(sps.kstest(l, "uniform").statistic))


def joint_jump_moment(model, f_spec, r: int, u: float, n_rep: int, seed: int) -> MCEstimate:
    """E[f(t(1), t(N)) 1_A] / (r^{g1+g2+1} w) by Monte Carlo over n_rep blocks.

    ``f_spec`` is ``(g1, g2, "product")`` for s^g1 t^g2 or
    ``(g, 0, "diff")`` for (t - s)_+^g.
    """
    from clusterlab.generators import iid_exceeding_stats

    g1, g2, form = f_spec
    w = model.tail_prob(u)
    gen = _rng.stream(seed, _rng.BLOCKS)
    if _use_fast_path(model):
        p_a = -math.expm1(r * math.log1p(-w))
        st = iid_exceeding_stats(w, r, int(gen.binomial(n_rep, p_a)), gen)
    else:
        st = simulate_block_stats(model, r, u, n_rep, gen)
        st = st.take(st.has)
    s, t = st.first.astype(float), st.last.astype(float)
    if form == "product":
        v = s**g1 * t**g2
    elif form == "diff":
        v = np.maximum(t - s, 0.0) ** g1
    else:
        raise ValueError(f"unknown joint moment form {form!r}")
    norm = r ** (g1 + g2 + 1) * w
    est = MCEstimate.from_sums(math.fsum(v), math.fsum(v * v), n_rep, seed, scale=norm)
    est.extra = {"form": form, "g1": g1, "g2": g2, "w": w}
    return est


# --- estimators on a single series ----------------------------------------------


def _series_stats(series, scheme: BlockScheme):
    """(BlockStats, u, w) for a series under a scheme."""
    th = scheme.threshold
    if isinstance(th, OrderStatistic):
        norms = _norms_of(series)
        u = resolve_threshold(norms, scheme)
        w = th.k / scheme.n
        return block_stats(norms, scheme.r, u), u, w
    u = th.u
    if scheme.w is None:
        raise ValueError("FixedLevel threshold needs scheme.w")
    if hasattr(series, "block_stats") and not isinstance(series, np.ndarray):
        return series.block_stats(scheme.r, u), u, scheme.w
    return block_stats(_norms_of(series), scheme.r, u), u, scheme.w


def empirical_cluster_measure(series, H: ClusterFunctional, scheme: BlockScheme, _stats=None) -> float:
    """(1 / (n w)) * sum_j H(u^-1 X_j) over the m disjoint blocks."""
    st, u, w = _stats or _series_stats(series, scheme)
    return math.fsum(H(st)) / (scheme.n * w)


def empirical_cluster_measure_rescaled(series, H: ClusterFunctional, scheme: BlockScheme, _stats=None) -> float:
    """(1 / (n r^gamma w)) * sum_j H(u^-1 X_j) for H = T_max^gamma G."""
    if H.tmax_power is None:
        raise ValueError(f"{H.name} is not of T_max-power type")
    st, u, w = _stats or _series_stats(series, scheme)
    return math.fsum(H(st)) / (scheme.n * float(scheme.r) ** H.tmax_power * w)


def extremal_index_estimator(series, scheme: BlockScheme, gamma: float = 1.0, _stats=None) -> float:
    """min(1, (gamma + 1) * rescaled measure of T_max^gamma * 1{x* > 1})."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    v = (gamma + 1.0) * empirical_cluster_measure_rescaled(series, tmax_pow(gamma, ei()), scheme, _stats)
    return min(1.0, v)


def anticlustering_diagnostic(model, gamma: float, ell: int, r: int, u: float, n_rep: int, seed: int) -> MCEstimate:
    """(1/w) sum_{i=ell..r} i^gamma P(X_0 > u, X_i > u) from n_rep stretches of length r+1."""
    from clusterlab.generators import sample_blocks

    if not 1 <= ell <= r:
        raise ValueError("need 1 <= ell <= r")
    w = model.tail_prob(u)
    gen = _rng.stream(seed, _rng.BLOCKS)
    i = np.arange(ell, r + 1, dtype=float)
    weights = i**gamma
    done = 0
    batch = max(1, (1 << 22) // (r + 1))
    s = s2 = 0.0
    while done < n_rep:
        size = min(batch, n_rep - done)
        x = sample_blocks(model, r + 1, size, gen) > u
        joint = x[:, 0:1] & x[:, ell:]
        v = joint.astype(float) @ weights
        s += math.fsum(v)
        s2 += math.fsum(v * v)
        done += size
    est = MCEstimate.from_sums(s, s2, n_rep, seed, scale=w)
    est.extra = {"w": w, "gamma": gamma, "ell": ell, "r": r}
    return est
