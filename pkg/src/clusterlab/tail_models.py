"""Tail processes of the shipped generators and Monte Carlo cluster indices.

For every model, conditionally on a large value at time 0 exactly one
innovation is responsible for it:

* iid: Y_j = 0 for j != 0.
* moving maxima: the big innovation sits at lag K with P(K = k) proportional
  to a_k**alpha, and Y_j = (a_{j+K} / a_K) Y_0 on -K <= j <= l - K.
* AR(1): the big innovation sits at lag K, P(K = k) = (1 - phi**alpha)
  phi**(k alpha), and Y_j = phi**j Y_0 for j >= -K, 0 before.

In all cases |Y_0| is Pareto(alpha) and independent of K. These forms are
checked against :func:`empirical_tail_path_oracle`, which conditions the
simulated series itself on an exceedance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from clusterlab import rng as _rng
from clusterlab.core import Window, block_stats
from clusterlab.estimators import MCEstimate
from clusterlab.functionals import ClusterFunctional
from clusterlab.generators import GeneratorModel, generate

DEFAULT_AR1_HORIZON = 2**10
BATCH = 1 << 16


@dataclass(frozen=True)
class TailProcessModel:
    model: GeneratorModel
    horizon: int

    @property
    def alpha(self):
        return self.model.alpha

    @property
    def model_id(self):
        return self.model.kind

    @property
    def theta_exact(self) -> float | None:
        m = self.model
        if m.kind == "iid_pareto":
            return 1.0
        if m.kind == "ar1":
            return 1.0 - m.phi**m.alpha
        a = np.asarray(m.weights)
        return float(a.max() ** m.alpha / (a**m.alpha).sum())

    def lag_probs(self) -> np.ndarray:
        m = self.model
        if m.kind == "moving_max":
            p = np.asarray(m.weights) ** m.alpha
            return p / p.sum()
        raise ValueError("lag distribution is only tabulated for moving maxima")

    def sample_paths(self, size: int, gen: np.random.Generator):
        """Truncated paths as an array (size, 2h+1); returns (paths, h).

        The width h is the smallest half-width that holds every coordinate
        that can be nonzero (iid, moving maxima) or above 1e-300 relative
        to the exceedance region (AR(1)), capped at the horizon M.
        """
        m = self.model
        y0 = _rng.pareto(gen, m.alpha, size)
        if m.kind == "iid_pareto":
            return y0.reshape(-1, 1), 0
        if m.kind == "moving_max":
            a = np.asarray(m.weights)
            lag = a.shape[0] - 1
            k = gen.choice(lag + 1, size=size, p=self.lag_probs())
            paths = np.zeros((size, 2 * lag + 1))
            j = np.arange(-lag, lag + 1)
            idx = j[None, :] + k[:, None]
            ok = (idx >= 0) & (idx <= lag)
            ratio = np.where(ok, a[np.clip(idx, 0, lag)], 0.0) / a[k][:, None]
            paths[:] = ratio * y0[:, None]
            return paths, lag
        phi, M = m.phi, self.horizon
        if phi == 0.0:
            return y0.reshape(-1, 1), 0
        # K ~ geometric on {0, 1, ...}: P(K >= k) = phi**(k alpha)
        v = 1.0 - gen.random(size)
        k = np.floor(np.log(v) / (m.alpha * math.log(phi))).astype(np.int64)
        np.minimum(k, M, out=k)
        fwd = int(np.ceil(np.log(y0.max()) / -math.log(phi))) + 1
        h = int(min(M, max(fwd, int(k.max()), 1)))
        j = np.arange(-h, h + 1)
        paths = np.where(j[None, :] >= -k[:, None], y0[:, None] * phi ** j[None, :].astype(float), 0.0)
        return paths, h


def tail_model(model: GeneratorModel, horizon: int | None = None) -> TailProcessModel:
    if horizon is None:
        r = model.dependence_range
        horizon = DEFAULT_AR1_HORIZON if r is None else r
    return TailProcessModel(model, int(horizon))


def sample_tail_path(tm: TailProcessModel, seed: int) -> Window:
    """One path on -M..M; the center (time 0) is at index M."""
    paths, h = tm.sample_paths(1, _rng.stream(seed, _rng.PATHS))
    M = tm.horizon
    full = np.zeros(2 * M + 1)
    full[M - h : M + h + 1] = paths[0]
    return Window(full)


def _batches(n, batch=BATCH):
    for start in range(0, n, batch):
        yield start // batch, min(batch, n - start)


def _path_terms(tm, paths, h, H):
    anchored = paths[:, :h].max(axis=1, initial=0.0) <= 1.0 if h else np.ones(paths.shape[0], bool)
    flat = np.ascontiguousarray(paths).ravel()
    stats = block_stats(flat, paths.shape[1], 1.0)
    return anchored, H(stats)


def candidate_theta(tm: TailProcessModel, n_paths: int, seed: int) -> MCEstimate:
    """Monte Carlo P(Y*_{1,M} <= 1); the exact value, when known, is in ``extra``."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    s = 0.0
    for b, size in _batches(n_paths):
        paths, h = tm.sample_paths(size, _rng.stream(seed, _rng.PATHS, b))
        s += float((paths[:, h + 1 :].max(axis=1, initial=0.0) <= 1.0).sum())
    p = s / n_paths
    est = MCEstimate(p, math.sqrt(p * (1 - p) / n_paths), n_paths, seed)
    est.extra = {"theta_exact": tm.theta_exact, "route": "forward tail path"}
    return est


@dataclass
class ClusterIndexEstimate:
    functional: str
    value: float
    std_error: float
    n_paths: int
    horizon: int
    extra: dict = field(default_factory=dict)


def cluster_index(tm: TailProcessModel, H: ClusterFunctional, n_paths: int, seed: int) -> ClusterIndexEstimate:
    """Monte Carlo E[H(Y) 1{Y*_{-M,-1} <= 1}]."""
    if not H.vanishes_around_zero:
        raise ValueError(f"{H.name} does not vanish around zero")
    if not H.shift_invariant:
        raise ValueError(f"{H.name} is not shift invariant; its cluster index is undefined")
    s = s2 = 0.0
    for b, size in _batches(n_paths):
        paths, h = tm.sample_paths(size, _rng.stream(seed, _rng.PATHS, b))
        anchored, v = _path_terms(tm, paths, h, H)
        t = np.where(anchored, v, 0.0)
        s += math.fsum(t)
        s2 += math.fsum(t * t)
    mean = s / n_paths
    var = max(s2 / n_paths - mean * mean, 0.0) * n_paths / max(n_paths - 1, 1)
    return ClusterIndexEstimate(H.name, mean, math.sqrt(var / n_paths), n_paths, tm.horizon)


class RejectionBudgetExceeded(RuntimeError):
    pass


def sample_Z(tm: TailProcessModel, size: int, seed: int, max_trials: int | None = None):
    """Paths of Y conditioned on Y*_{-M,-1} <= 1, by rejection.

    Returns (paths, h, acceptance_rate); paths share the half-width h.
    """
    max_trials = max_trials or 100 * size + 10_000
    kept, trials, b, got = [], 0, 0, 0
    width = 0
    while got < size:
        if trials >= max_trials:
            raise RejectionBudgetExceeded(
                f"accepted {got} of {size} after {trials} trials (rate {got / max(trials, 1):.3g})"
            )
        n = min(BATCH, max(size, 1024))
        paths, h = tm.sample_paths(n, _rng.stream(seed, _rng.PATHS, b))
        b += 1
        trials += n
        acc = paths[:, :h].max(axis=1, initial=0.0) <= 1.0 if h else np.ones(n, bool)
        kept.append((paths[acc], h))
        got += int(acc.sum())
        width = max(width, h)
    out = np.zeros((got, 2 * width + 1))
    row = 0
    for p, h in kept:
        out[row : row + p.shape[0], width - h : width + h + 1] = p
        row += p.shape[0]
    accepted = out.shape[0]
    return out[:size], width, accepted / trials


def limiting_length_pmf(tm: TailProcessModel, n_paths: int, seed: int, q_max: int | None = None):
    """Limiting conditional pmf of the cluster length, f(q) = nu*(1{L=q}) / theta.

    The numerator uses the backward anchor Y*_{-M,-1} <= 1, the denominator
    the exact theta when known and the forward route otherwise, so the sum of
    f is a genuine check rather than 1 by construction. Returns a dict with
    pmf, its standard errors, the sum and the standard error of the sum.
    """
    counts = {}
    n_anchor = 0
    for b, size in _batches(n_paths):
        paths, h = tm.sample_paths(size, _rng.stream(seed, _rng.PATHS, b))
        anchored = paths[:, :h].max(axis=1, initial=0.0) <= 1.0 if h else np.ones(size, bool)
        st = block_stats(np.ascontiguousarray(paths).ravel(), paths.shape[1], 1.0)
        L = st.length[anchored]
        n_anchor += int(anchored.sum())
        for q, c in zip(*np.unique(L, return_counts=True)):
            counts[int(q)] = counts.get(int(q), 0) + int(c)
    theta = tm.theta_exact
    theta_se = 0.0
    if theta is None:
        est = candidate_theta(tm, n_paths, seed + 1)
        theta, theta_se = est.value, est.std_error
    q_top = max(counts) if counts else 1
    if q_max is not None:
        q_top = max(q_top, q_max)
    qs = np.arange(1, q_top + 1)
    p = np.array([counts.get(int(q), 0) for q in qs]) / n_paths
    pmf = p / theta
    pmf_se = np.sqrt(p * (1 - p) / n_paths) / theta
    pa = n_anchor / n_paths
    total = pa / theta
    total_se = math.sqrt((pa * (1 - pa) / n_paths) / theta**2 + (pa * theta_se / theta**2) ** 2)
    return {"q": qs, "pmf": pmf, "pmf_se": pmf_se, "sum": total, "sum_se": total_se, "theta": theta}


def empirical_tail_path_oracle(model: GeneratorModel, u: float, halfwidth: int, n_sims: int, seed: int) -> np.ndarray:
    """Windows u**-1 X_{t-h..t+h} around every t with X_t > u in a path of length n_sims."""
    x = generate(model, n_sims, seed).norms()
    h = int(halfwidth)
    t = np.flatnonzero(x > u)
    t = t[(t >= h) & (t < x.shape[0] - h)]
    if t.shape[0] == 0:
        raise ValueError("no conditioning exceedances; lower u or raise n_sims")
    idx = t[:, None] + np.arange(-h, h + 1)[None, :]
    return x[idx] / u
