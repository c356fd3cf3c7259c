"""Centered, normalized block-sum processes over Monte Carlo replicates.

For a block scheme (n, r, u) with m = n // r and w = P(|X| > u):

* ``G_tilde``: sum_j {H(X_j) - E H} / sqrt(n w)
* ``K_tilde``: sum_j {H(X_j) - E H} / (sqrt(n r^(2 gamma + 1)) w)
* ``L_tilde``: sum_j {H(X_j) - E H} / (sqrt(n w) r^gamma)

The expectation E H is estimated from an independent, larger simulation.
Every replicate is a fresh series keyed by ``(seed, REPLICATE, i)``, so the
replicate matrix does not depend on the number of workers.
"""

from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from clusterlab import rng as _rng
from clusterlab.core import BlockScheme, FixedLevel, _norms_of, block_stats
from clusterlab.functionals import ClusterFunctional, parse
from clusterlab.generators import GeneratorModel, generate, iid_exceeding_stats


class ProcessKind(str, enum.Enum):
    G_tilde = "G_tilde"
    K_tilde = "K_tilde"
    L_tilde = "L_tilde"

    def scale(self, n: int, r: int, w: float, gamma: float = 0.0) -> float:
        if self is ProcessKind.G_tilde:
            return math.sqrt(n * w)
        if self is ProcessKind.K_tilde:
            return math.sqrt(n * float(r) ** (2 * gamma + 1)) * w
        return math.sqrt(n * w) * float(r) ** gamma


class CenteringWarning(UserWarning):
    pass


@dataclass
class ProcessSample:
    kind: ProcessKind
    names: list
    values: np.ndarray  # (n_replicates, len(names))
    centering: np.ndarray
    centering_se: np.ndarray
    centering_rep: int
    scheme: BlockScheme
    model: GeneratorModel
    gamma: float
    scale: float
    seed: int
    # centering is always an independent run, never the replicate data
    centering_independent: bool = True
    warnings: list = field(default_factory=list)

    @property
    def n_replicates(self) -> int:
        return self.values.shape[0]

    def column(self, name) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def to_csv_rows(self):
        """Rows (replicate, functional, value) in replicate-major order."""
        for i in range(self.values.shape[0]):
            for j, name in enumerate(self.names):
                yield i, name, float(self.values[i, j])


def _as_functionals(H_list):
    return [parse(h) if isinstance(h, str) else h for h in H_list]


def _check_admissible(kind, H_list):
    for h in H_list:
        if not h.vanishes_around_zero:
            raise ValueError(f"{h.name} does not vanish around zero")
        if kind is ProcessKind.L_tilde:
            if h.tmax_power is None:
                raise ValueError(f"{h.name} is not of T_max-power type, required for L_tilde")
        elif not h.shift_invariant:
            raise ValueError(f"{h.name} is not shift invariant, required for {kind.value}")


def _fast(model, H_list):
    return model.kind == "iid_pareto" and all(h.pattern_only for h in H_list)


def _block_sums(model, H_list, r, w, u, count, gen):
    """Sums and sums of squares of H over ``count`` independent blocks."""
    from clusterlab.estimators import simulate_block_stats

    if _fast(model, H_list):
        k = int(gen.binomial(count, -math.expm1(r * math.log1p(-w))))
        st = iid_exceeding_stats(w, r, k, gen)
    else:
        st = simulate_block_stats(model, r, u, count, gen)
    vals = [h(st) for h in H_list]
    return np.array([math.fsum(v) for v in vals]), np.array([math.fsum(v * v) for v in vals])


def estimate_centering(model, H_list, r: int, u: float, w: float, centering_rep: int, seed: int):
    """Mean and standard error of H(X_1) from ``centering_rep`` independent blocks."""
    gen = _rng.stream(seed, _rng.CENTERING)
    s, s2 = np.zeros(len(H_list)), np.zeros(len(H_list))
    step = 1 << 24 if _fast(model, H_list) else max(1, (1 << 22) // r)
    for start in range(0, centering_rep, step):
        a, b = _block_sums(model, H_list, r, w, u, min(step, centering_rep - start), gen)
        s += a
        s2 += b
    mean = s / centering_rep
    var = np.maximum(s2 / centering_rep - mean**2, 0.0) * centering_rep / max(centering_rep - 1, 1)
    return mean, np.sqrt(var / centering_rep)


def replicate_sums(model, H_list, scheme: BlockScheme, u: float, w: float, rep: int, seed: int) -> np.ndarray:
    """Block sums sum_j H(X_j) for one fresh series of length n."""
    r, m = scheme.r, scheme.m
    if _fast(model, H_list):
        gen = _rng.stream(seed, _rng.REPLICATE, rep)
        k = int(gen.binomial(m, -math.expm1(r * math.log1p(-w))))
        st = iid_exceeding_stats(w, r, k, gen)
    else:
        st = generate(model, m * r, seed, rep=rep).block_stats(r, u)
    return np.array([math.fsum(h(st)) for h in H_list])


def process_values(series, H_list, scheme: BlockScheme, centering, kind, gamma: float = 0.0) -> np.ndarray:
    """Process values for one given series (array, Window or series handle)."""
    kind = ProcessKind(kind)
    H_list = _as_functionals(H_list)
    if not isinstance(scheme.threshold, FixedLevel) or scheme.w is None:
        raise ValueError("process values need a fixed level and a known w")
    st = block_stats(_norms_of(series), scheme.r, scheme.threshold.u)
    sums = np.array([math.fsum(h(st)) for h in H_list])
    sc = kind.scale(scheme.n, scheme.r, scheme.w, gamma)
    return (sums - scheme.m * np.asarray(centering, dtype=float)) / sc


def _replicate_range(args):
    model, H_specs, scheme, u, w, lo, hi, seed = args
    H_list = _as_functionals(H_specs)
    return np.array([replicate_sums(model, H_list, scheme, u, w, i, seed) for i in range(lo, hi)])


def _resolve(model, scheme):
    if not isinstance(scheme.threshold, FixedLevel):
        raise ValueError("processes need a fixed level u (pseudo-estimator setting)")
    u = scheme.threshold.u
    w = scheme.w if scheme.w is not None else model.tail_prob(u)
    return u, w


def sample_process(kind, model: GeneratorModel, H_list, scheme: BlockScheme, n_replicates: int,
                   centering_rep: int | None = None, seed: int = 0, gamma: float | None = None,
                   workers: int = 1, centering_tol: float = 0.1) -> ProcessSample:
    """Replicate values of the process for every functional in ``H_list``.

    ``H_list`` holds functionals or their string names (strings are needed
    for ``workers > 1``). ``gamma`` defaults to the T_max power (L_tilde) or
    the growth index of the first functional (K_tilde). The default
    ``centering_rep`` is max(20 * n_replicates, 200 * m) blocks on the iid
    pattern path and max(20 * n_replicates, 4 * m) otherwise. A warning is
    recorded when the centering error, carried through m blocks, exceeds
    ``centering_tol`` replicate standard deviations.
    """
    kind = ProcessKind(kind)
    specs = list(H_list)
    H_list = _as_functionals(specs)
    _check_admissible(kind, H_list)
    if n_replicates < 1:
        raise ValueError("n_replicates must be >= 1")
    if gamma is None:
        h0 = H_list[0]
        gamma = h0.tmax_power if kind is ProcessKind.L_tilde else (h0.gamma if kind is ProcessKind.K_tilde else 0.0)
    u, w = _resolve(model, scheme)
    m = scheme.m
    centering_rep = centering_rep or max(20 * n_replicates, (200 if _fast(model, H_list) else 4) * m)
    mean, se = estimate_centering(model, H_list, scheme.r, u, w, centering_rep, seed)

    if workers > 1 and n_replicates > 1:
        if not all(isinstance(h, str) for h in specs):
            raise ValueError("workers > 1 needs functionals given by name")
        edges = np.linspace(0, n_replicates, min(workers, n_replicates) + 1).astype(int)
        jobs = [(model, specs, scheme, u, w, int(a), int(b), seed) for a, b in zip(edges[:-1], edges[1:]) if b > a]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            sums = np.concatenate(list(ex.map(_replicate_range, jobs)))
    else:
        sums = np.array([replicate_sums(model, H_list, scheme, u, w, i, seed) for i in range(n_replicates)])
    sc = kind.scale(scheme.n, scheme.r, w, gamma)
    values = (sums - m * mean) / sc
    sample = ProcessSample(kind, [h.name for h in H_list], values, mean, se, centering_rep,
                           scheme, model, float(gamma), sc, int(seed))
    if n_replicates > 1:
        sd = values.std(axis=0, ddof=1)
        shift = m * se / sc
        for name, a, b in zip(sample.names, shift, sd):
            if b > 0 and a > centering_tol * b:
                msg = f"centering error for {name} is {a / b:.3g} replicate SDs; raise centering_rep"
                sample.warnings.append({"functional": name, "shift_se": float(a), "replicate_sd": float(b)})
                warnings.warn(msg, CenteringWarning, stacklevel=2)
    return sample


# --- targets ------------------------------------------------------------------


def target_G(nu_star_HH: float) -> float:
    return float(nu_star_HH)


def target_K(theta: float, gamma: float) -> float:
    return theta**2 / ((2 * gamma + 1) * (2 * gamma + 2))


def target_L(nu_star_G2: float, gamma: float) -> float:
    """Variance limit from the L_{n,1} term: nu*(G^2) / (2 gamma + 1)."""
    return nu_star_G2 / (2 * gamma + 1)


def target_L_alternative(nu_star_G2: float, gamma: float) -> float:
    """The (1 + gamma)^-1 nu*(G^2) form, reported next to :func:`target_L`."""
    return nu_star_G2 / (1 + gamma)


# --- reports ------------------------------------------------------------------


def _jackknife(values, stat, groups=20):
    n = values.shape[0]
    g = min(groups, n)
    edges = np.linspace(0, n, g + 1).astype(int)
    full = stat(values)
    loo = np.array([stat(np.delete(values, np.s_[a:b], axis=0)) for a, b in zip(edges[:-1], edges[1:])])
    return np.sqrt((g - 1) / g * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0)), full


def _cov(v):
    return np.atleast_2d(np.cov(v, rowvar=False, ddof=1))


def variance_report(sample: ProcessSample, targets=None, rel_tol: float = 0.1, alternative=None) -> dict:
    """Sample covariance across functionals with grouped-jackknife SEs.

    ``targets`` maps functional names to variance targets, or is a full
    covariance matrix in the order of ``sample.names``. ``alternative`` is an
    optional second set of variance targets, reported but not tested.
    """
    if sample.n_replicates < 100:
        raise ValueError("variance_report needs at least 100 replicates")
    cov_se, cov = _jackknife(sample.values, _cov)
    names = sample.names
    rep = {
        "kind": sample.kind.value,
        "names": names,
        "n_replicates": sample.n_replicates,
        "mean": sample.values.mean(axis=0).tolist(),
        "variance": np.diag(cov).tolist(),
        "variance_se": np.diag(cov_se).tolist(),
        "covariance": cov.tolist(),
        "covariance_se": cov_se.tolist(),
        "rel_tol": rel_tol,
        "centering_independent": sample.centering_independent,
        "warnings": list(sample.warnings),
    }
    if targets is not None:
        if isinstance(targets, dict):
            tv = np.array([targets.get(n, np.nan) for n in names], dtype=float)
            tcov = None
        else:
            tcov = np.atleast_2d(np.asarray(targets, dtype=float))
            tv = np.diag(tcov)
        rel = np.abs(np.diag(cov) - tv) / np.abs(tv)
        rep["target"] = tv.tolist()
        rep["rel_err"] = rel.tolist()
        rep["pass"] = bool(np.all(np.isnan(tv) | (rel <= rel_tol)))
        if tcov is not None:
            rep["target_covariance"] = tcov.tolist()
    if alternative is not None:
        rep["alternative_target"] = [alternative.get(n, None) for n in names]
    return rep


def _shape_stats(x):
    z = (x - x.mean()) / x.std(ddof=1)
    ks = sps.kstest(z, "norm").statistic
    return np.array([ks, abs(sps.skew(z)), abs(sps.kurtosis(z))])


def gaussianity_check(sample: ProcessSample, n_boot: int = 200, seed: int | None = None) -> dict:
    """KS distance to a fitted normal, |skewness|, |excess kurtosis| with bootstrap SEs."""
    if sample.n_replicates < 500:
        raise ValueError("gaussianity_check needs at least 500 replicates")
    gen = _rng.stream(sample.seed if seed is None else seed, _rng.BOOTSTRAP)
    out = {}
    n = sample.n_replicates
    for j, name in enumerate(sample.names):
        x = sample.values[:, j]
        if x.std() == 0:
            out[name] = {"ks": float("nan"), "skewness": 0.0, "excess_kurtosis": 0.0, "degenerate": True}
            continue
        base = _shape_stats(x)
        boot = np.array([_shape_stats(x[gen.integers(0, n, n)]) for _ in range(n_boot)])
        se = boot.std(axis=0, ddof=1)
        out[name] = {
            "ks": float(base[0]), "ks_se": float(se[0]),
            "skewness": float(base[1]), "skewness_se": float(se[1]),
            "excess_kurtosis": float(base[2]), "excess_kurtosis_se": float(se[2]),
        }
    return out


def write_replicates_csv(path, sample: ProcessSample) -> None:
    from clusterlab.io import write_csv

    write_csv(path, ["replicate", "functional", "value"], sample.to_csv_rows())
