"""Experiment drivers behind the command line runner.

Each driver takes a resolved config and returns an :class:`ExperimentResult`
holding scalar outputs, targets, the pass/fail verdict and detail tables.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from clusterlab import config as _cfg
from clusterlab import iid_oracle as oracle
from clusterlab.core import BlockScheme, FixedLevel, NormSpec, OrderStatistic
from clusterlab.estimators import (
    _series_stats,
    anticlustering_diagnostic,
    empirical_cluster_measure,
    empirical_cluster_measure_rescaled,
    extremal_index_estimator,
    jump_time_law,
)
from clusterlab.functionals import ei, length_pow, parse
from clusterlab.generators import block_maxima_theta_oracle, generate, iid_block_stats
from clusterlab import rng as _rng


@dataclass
class ExperimentResult:
    outputs: dict = field(default_factory=dict)
    targets: dict = field(default_factory=dict)
    passed: bool = True
    failures: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)  # name -> (header, rows)

    def check(self, name, ok, **record):
        if not ok:
            self.passed = False
            self.failures.append({"check": name, **record})


def block_regime(r: int, w: float, gamma: float) -> str:
    """``small`` if r^(2g+1) w < 1, ``large`` if r^(g+1) w > 1, else ``moderate``."""
    if r ** (gamma + 1) * w > 1:
        return "large"
    if r ** (2 * gamma + 1) * w < 1:
        return "small"
    return "moderate"


def _tol(cfg, name, default=None):
    return cfg.get("tolerances", {}).get(name, default)


def _level(cfg, model):
    sc = cfg.get("scheme", {})
    if "w" in sc:
        return model.level_for(sc["w"]), float(sc["w"])
    if "u" in sc:
        return float(sc["u"]), model.tail_prob(sc["u"])
    raise _cfg.ConfigError("invalid config", ["scheme: u or w required"])


def _reps(cfg, name, default):
    return int(cfg.get("replications", {}).get(name, default))


# --- oracle ---------------------------------------------------------------------


def run_oracle_table(cfg) -> ExperimentResult:
    grid = cfg.get("grid", {})
    rs = grid.get("r", list(range(2, 13)))
    ws = grid.get("w", [0.1, 0.3, 0.5])
    gammas = grid.get("gamma", [0, 1, 2])
    tol = _tol(cfg, "rel_err", 1e-12)
    res = ExperimentResult()
    rows = []

    def add(r, w, g, stat, closed, enum):
        rel = abs(closed - enum) / abs(enum) if enum != 0 else abs(closed)
        rows.append({"r": r, "w": w, "gamma": g, "statistic": stat, "value": closed, "target": enum, "rel_err": rel})

    for r in rs:
        for w in ws:
            pmf_c = oracle.closed_form_length_pmf(r, w)
            pmf_e = oracle.enumerated_length_pmf(r, w)
            for i in range(r):
                add(r, w, "", f"pmf_{i + 1}", float(pmf_c[i]), float(pmf_e[i]))
            for g in gammas:
                add(r, w, g, "length_moment", oracle.length_moment(r, w, g),
                    oracle.enumerate_patterns(r, w, length_pow(g))[0])
            add(r, w, 1, "first_jump_moment", oracle.first_jump_moment(r, w, 1),
                oracle.enumerate_patterns(r, w, lambda s: s.first.astype(float))[0])
            add(r, w, "", "joint_product_moment", oracle.joint_product_moment(r, w, 1, 1),
                oracle.enumerate_patterns(r, w, lambda s: (s.first * s.last).astype(float))[0])
    worst = max(row["rel_err"] for row in rows)
    res.outputs = {"max_rel_err": worst, "n_rows": len(rows)}
    res.targets = {"max_rel_err": tol}
    res.check("max_rel_err", worst <= tol, value=worst, tolerance=tol)
    res.tables["oracle_table"] = (["r", "w", "gamma", "statistic", "value", "target", "rel_err"], rows)
    return res


def run_moment_rate(cfg) -> ExperimentResult:
    t = cfg.get("table", {})
    rs = t.get("r", [10, 100, 1000, 10000])
    w = t.get("w", 1e-6)
    gamma = cfg.get("gamma", 1.0)
    rows = oracle.moment_rate_table(rs, w, gamma)
    res = ExperimentResult()
    for row in rows:
        row["regime"] = block_regime(row["r"], row["w"], gamma)
    res.outputs = {"n_rows": len(rows)}
    tol = cfg.get("tolerances", {})
    for row in rows:
        key = f"{row['statistic']}_rel"
        if key in tol:
            res.check(key, row["rel_err"] <= tol[key], r=row["r"], w=row["w"], value=row["value"],
                      target=row["target"], rel_err=row["rel_err"], tolerance=tol[key])
    res.tables["moment_rate"] = (["r", "w", "gamma", "statistic", "value", "target", "rel_err", "r_pow_w", "regime"], rows)
    return res


# --- Monte Carlo experiments ------------------------------------------------------


def run_jump_law(cfg) -> ExperimentResult:
    model = _cfg.model_of(cfg)
    u, w = _level(cfg, model)
    r = int(cfg["scheme"]["r"])
    n_rep = _reps(cfg, "n_rep", 100_000)
    law = jump_time_law(model, r, u, n_rep, cfg["seed"])
    tol = _tol(cfg, "ks", 0.02)
    res = ExperimentResult()
    res.outputs = {"ks_first": law.ks_first, "ks_last": law.ks_last, "n_samples": int(law.first.shape[0]), "w": w, "r_w": r * w}
    res.targets = {"ks_first": tol, "ks_last": tol}
    res.check("ks_first", law.ks_first < tol, value=law.ks_first, tolerance=tol)
    res.check("ks_last", law.ks_last < tol, value=law.ks_last, tolerance=tol)
    grid, f1 = law.ecdf("first")
    _, fn = law.ecdf("last")
    res.tables["jump_ecdf"] = (["x", "ecdf_first", "ecdf_last"], list(zip(grid, f1, fn)))
    return res


def _consistency_rep(args):
    model, specs, scheme, gamma, seed, i = args
    H_list = [parse(s) for s in specs]
    u = scheme.threshold.u
    if model.kind == "iid_pareto" and all(h.pattern_only for h in H_list):
        st = iid_block_stats(scheme.w, scheme.r, scheme.m, _rng.stream(seed, _rng.REPLICATE, i))
    else:
        st = generate(model, scheme.m * scheme.r, seed, rep=i).block_stats(scheme.r, u)
    stats = (st, u, scheme.w)
    row = []
    for h in H_list:
        if h.tmax_power is not None and h.tmax_power > 0:
            row.append(empirical_cluster_measure_rescaled(None, h, scheme, _stats=stats))
        else:
            row.append(empirical_cluster_measure(None, h, scheme, _stats=stats))
    row.append(extremal_index_estimator(None, scheme, gamma, _stats=stats))
    return row


def _map(fn, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def _cluster_target(model, h, n_paths, seed):
    """Tail-process value of nu*(h), or (1+g)^-1 nu*(G) for T_max^g G."""
    from clusterlab.tail_models import candidate_theta, cluster_index, tail_model

    tm = tail_model(model)
    base, factor = h, 1.0
    if h.tmax_power is not None and h.tmax_power > 0:
        base, factor = h.base, 1.0 / (1.0 + h.tmax_power)
    if base.name == "ei":
        if tm.theta_exact is not None:
            return factor * tm.theta_exact, 0.0
        est = candidate_theta(tm, n_paths, seed)
        return factor * est.value, factor * est.std_error
    ci = cluster_index(tm, base, n_paths, seed)
    return factor * ci.value, factor * ci.std_error


def _estimate_on_data(cfg) -> ExperimentResult:
    from clusterlab.io import ingest_csv

    win = ingest_csv(cfg["series_csv"])
    norms = win.norms(NormSpec(cfg.get("norm", "euclidean")))
    sc = cfg.get("scheme", {})
    n = norms.shape[0]
    r = int(sc["r"])
    if "k" in sc:
        scheme = BlockScheme(n, r, OrderStatistic(int(sc["k"])))
    elif "u" in sc:
        w = float((norms > sc["u"]).mean())
        if not 0 < w < 1:
            raise _cfg.ConfigError("invalid config", [f"scheme: no exceedances of u={sc['u']:g} in the data"])
        scheme = BlockScheme(n, r, FixedLevel(float(sc["u"])), w, "estimated")
    else:
        raise _cfg.ConfigError("invalid config", ["scheme: data estimates need k or u"])
    stats = _series_stats(norms, scheme)
    gamma = cfg.get("gamma", 1.0)
    res = ExperimentResult()
    for spec in cfg.get("functionals", ["ei"]):
        h = parse(spec)
        if h.tmax_power is not None and h.tmax_power > 0:
            res.outputs[spec] = empirical_cluster_measure_rescaled(None, h, scheme, _stats=stats)
        else:
            res.outputs[spec] = empirical_cluster_measure(None, h, scheme, _stats=stats)
    res.outputs["theta_tilde"] = extremal_index_estimator(None, scheme, gamma, _stats=stats)
    res.outputs.update({"n": n, "r": r, "u": stats[1], "w": stats[2], "d": win.dim})
    return res


def run_consistency(cfg) -> ExperimentResult:
    if "series_csv" in cfg:
        return _estimate_on_data(cfg)
    model = _cfg.model_of(cfg)
    scheme = _cfg.scheme_of(cfg, model)
    if not isinstance(scheme.threshold, FixedLevel):
        raise _cfg.ConfigError("invalid config", ["scheme: simulated consistency needs u or w"])
    specs = cfg.get("functionals", ["ei"])
    gamma = cfg.get("gamma", 1.0)
    n_rep = _reps(cfg, "n_rep", 50)
    n_paths = _reps(cfg, "n_paths", 1_000_000)
    seed = cfg["seed"]
    vals = np.array(_map(_consistency_rep, [(model, specs, scheme, gamma, seed, i) for i in range(n_rep)], cfg["workers"]))
    names = list(specs) + ["theta_tilde"]
    res = ExperimentResult()
    k_se = _tol(cfg, "n_se", 3.0)
    for j, name in enumerate(names):
        col = vals[:, j]
        mean = math.fsum(col) / n_rep
        se = col.std(ddof=1) / math.sqrt(n_rep) if n_rep > 1 else float("nan")
        h = ei() if name == "theta_tilde" else parse(name)
        if not h.shift_invariant and not (h.tmax_power is not None):
            target, tse = float("nan"), 0.0
        else:
            target, tse = _cluster_target(model, h, n_paths, seed + 1)
        res.outputs[name] = {"mean": mean, "se": se}
        res.targets[name] = {"value": target, "se": tse}
        if math.isfinite(target):
            dist = abs(mean - target)
            bound = k_se * math.sqrt(se**2 + tse**2)
            res.check(name, dist <= bound, mean=mean, target=target, distance=dist, bound=bound)
    res.outputs.update({"w": scheme.w, "w_source": scheme.w_source, "u": scheme.threshold.u, "m": scheme.m})
    res.tables["replicates"] = (["replicate"] + names, [[i, *row] for i, row in enumerate(vals.tolist())])
    return res


def run_process_clt(cfg) -> ExperimentResult:
    from clusterlab.processes import ProcessKind, gaussianity_check, sample_process, variance_report

    model = _cfg.model_of(cfg)
    scheme = _cfg.scheme_of(cfg, model)
    kind = ProcessKind(cfg.get("process", "G_tilde"))
    specs = cfg.get("functionals", ["ei"])
    n_rep = _reps(cfg, "n_rep", 1000)
    cent = cfg.get("replications", {}).get("centering_rep")
    gamma = cfg.get("gamma")
    sample = sample_process(kind, model, specs, scheme, n_rep, cent, cfg["seed"], gamma, cfg["workers"])
    targets = cfg.get("targets")
    alternative = None
    if targets and kind is ProcessKind.L_tilde:
        g = sample.gamma
        alternative = {k: v * (2 * g + 1) / (1 + g) for k, v in targets.items()}
    rel_tol = _tol(cfg, "variance_rel", 0.1)
    res = ExperimentResult()
    rep = variance_report(sample, targets, rel_tol, alternative) if n_rep >= 100 else {}
    res.outputs["variance_report"] = rep
    res.outputs["scale"] = sample.scale
    res.outputs["gamma"] = sample.gamma
    res.outputs["centering"] = dict(zip(sample.names, sample.centering.tolist()))
    res.outputs["centering_se"] = dict(zip(sample.names, sample.centering_se.tolist()))
    res.outputs["centering_rep"] = sample.centering_rep
    res.targets = {"variance": targets, "alternative_variance": alternative}
    if "pass" in rep:
        res.check("variance", rep["pass"], variance=rep["variance"], target=rep["target"], rel_err=rep["rel_err"])
    if n_rep >= 500:
        g = gaussianity_check(sample)
        res.outputs["gaussianity"] = g
        for key, stat in (("ks", "ks"), ("skewness", "skewness"), ("kurtosis", "excess_kurtosis")):
            t = _tol(cfg, key)
            if t is not None:
                for name, rep_g in g.items():
                    res.check(f"{key}:{name}", rep_g[stat] < t, value=rep_g[stat], tolerance=t)
    res.tables["replicates"] = (["replicate", "functional", "value"], list(sample.to_csv_rows()))
    return res


def run_theta_hat(cfg) -> ExperimentResult:
    from clusterlab.tail_models import candidate_theta, tail_model

    model = _cfg.model_of(cfg)
    scheme = _cfg.scheme_of(cfg, model)
    seed = cfg["seed"]
    tm = tail_model(model)
    ct = candidate_theta(tm, _reps(cfg, "n_paths", 1_000_000), seed)
    n_blocks = _reps(cfg, "n_blocks", scheme.m)
    bm = block_maxima_theta_oracle(model, n_blocks * scheme.r, scheme.r, scheme.threshold.u, seed + 1)
    res = ExperimentResult()
    res.outputs = {"candidate_theta": ct.as_dict(), "block_maxima_theta": bm.as_dict()}
    k_se = _tol(cfg, "n_se", 3.0)
    comb = math.sqrt(ct.std_error**2 + bm.std_error**2)
    res.check("oracle_agreement", abs(ct.value - bm.value) <= k_se * comb,
              candidate=ct.value, block_maxima=bm.value, bound=k_se * comb)
    exact = tm.theta_exact
    res.targets = {"theta_exact": exact}
    tol = _tol(cfg, "abs", 0.01)
    if exact is not None:
        for name, est in (("candidate_theta", ct), ("block_maxima_theta", bm)):
            res.check(f"{name}_vs_exact", abs(est.value - exact) <= tol, value=est.value, target=exact, tolerance=tol)
    n_rep = _reps(cfg, "n_rep", 0)
    if n_rep:
        gamma = cfg.get("gamma", 1.0)
        vals = np.array(_map(_consistency_rep, [(model, [], scheme, gamma, seed + 2, i) for i in range(n_rep)], cfg["workers"]))[:, -1]
        res.outputs["theta_tilde"] = {"mean": float(vals.mean()), "se": float(vals.std(ddof=1) / math.sqrt(n_rep)) if n_rep > 1 else None}
        res.tables["theta_tilde"] = (["replicate", "theta_tilde"], list(enumerate(vals.tolist())))
    return res


def run_anticluster_diag(cfg) -> ExperimentResult:
    model = _cfg.model_of(cfg)
    u, w = _level(cfg, model)
    r = int(cfg["scheme"]["r"])
    gamma = cfg.get("gamma", 1.0)
    n_rep = _reps(cfg, "n_rep", 100_000)
    ells = cfg.get("ell", [1, max(1, r // 10), max(1, r // 2)])
    rows = []
    for ell in ells:
        e = anticlustering_diagnostic(model, gamma, int(ell), r, u, n_rep, cfg["seed"])
        rows.append({"ell": int(ell), "value": e.value, "se": e.std_error})
    res = ExperimentResult()
    res.outputs = {"rows": rows, "w": w, "gamma": gamma, "r": r}
    t = _tol(cfg, "max_value")
    if t is not None:
        last = rows[-1]
        res.check("tail_sum", last["value"] <= t, value=last["value"], tolerance=t, ell=last["ell"])
    res.tables["anticluster"] = (["ell", "value", "se"], rows)
    return res


def run_simulate(cfg) -> ExperimentResult:
    model = _cfg.model_of(cfg)
    n = int(cfg.get("scheme", {}).get("n", 1000))
    x = generate(model, n, cfg["seed"]).norms()
    res = ExperimentResult()
    res.outputs = {"n": n, "max": float(x.max()), "mean": float(x.mean())}
    sc = cfg.get("scheme", {})
    if "u" in sc or "w" in sc:
        u, w = _level(cfg, model)
        res.outputs.update({"u": u, "w_model": w, "w_empirical": float((x > u).mean())})
    res.tables["series"] = (["t", "x"], list(enumerate(x.tolist(), start=1)))
    return res


def run_sweep(cfg) -> ExperimentResult:
    from clusterlab.processes import ProcessKind, sample_process

    model = _cfg.model_of(cfg)
    gamma = cfg.get("gamma", 1.0)
    rs = _cfg.r_values(cfg)
    rows = []
    var_by_r = []
    for r in rs:
        scheme = _cfg.scheme_of(cfg, model, r=r)
        w = scheme.w
        row = {"r": r, "w": w, "r_pow_g1_w": r ** (gamma + 1) * w, "r_pow_2g1_w": r ** (2 * gamma + 1) * w,
               "regime": block_regime(r, w, gamma)}
        if model.kind == "iid_pareto":
            el = oracle.length_moment(r, w, gamma)
            row["length_small"] = el / (r * w)
            row["length_large"] = el / (r ** (gamma + 2) * w * w)
        if "process" in cfg:
            n_rep = _reps(cfg, "n_rep", 500)
            s = sample_process(ProcessKind(cfg["process"]), model, cfg.get("functionals", ["length"]), scheme,
                               n_rep, cfg.get("replications", {}).get("centering_rep"), cfg["seed"], gamma, cfg["workers"])
            v = float(s.values[:, 0].var(ddof=1))
            row["process_variance"] = v
            var_by_r.append(v)
        rows.append(row)
    res = ExperimentResult()
    res.outputs = {"regimes": [row["regime"] for row in rows], "r": rs}
    if var_by_r:
        growth = var_by_r[-1] / var_by_r[0]
        res.outputs["variance_growth"] = growth
        t = _tol(cfg, "growth_min")
        if t is not None:
            res.check("variance_growth", growth >= t, value=growth, tolerance=t)
    header = ["r", "w", "r_pow_g1_w", "r_pow_2g1_w", "regime"]
    if model.kind == "iid_pareto":
        header += ["length_small", "length_large"]
    if var_by_r:
        header.append("process_variance")
    res.tables["sweep"] = (header, rows)
    return res


RUNNERS = {
    "oracle_table": run_oracle_table,
    "moment_rate": run_moment_rate,
    "jump_law": run_jump_law,
    "consistency": run_consistency,
    "process_clt": run_process_clt,
    "theta_hat": run_theta_hat,
    "anticluster_diag": run_anticluster_diag,
    "simulate": run_simulate,
    "sweep": run_sweep,
}
