import json
import os

import numpy as np
import pytest

from clusterlab.cli import main
from clusterlab.config import ConfigError, resolve, validate
from clusterlab.experiments import block_regime
from clusterlab.io import IngestError, fmt, ingest_csv, write_csv

IID = {"model": "iid_pareto", "alpha": 1}


def run(tmp_path, cfg, cmd, *flags, name="cfg.json", out="out"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    code = main([cmd, "--config", str(p), "--out", str(tmp_path / out), "--workers", "1", *flags])
    summ = tmp_path / out / "summary.json"
    return code, (json.loads(summ.read_text()) if summ.exists() else None)


def test_oracle_table(tmp_path):
    code, s = run(tmp_path, {"experiment": "oracle_table"}, "oracle")
    assert code == 0 and s["pass"]
    assert s["outputs"]["max_rel_err"] <= 1e-12
    assert s["config"]["experiment"] == "oracle_table" and s["config"]["seed"] == 0
    text = (tmp_path / "out" / "oracle_table.csv").read_text()
    assert text.splitlines()[0] == "r,w,gamma,statistic,value,target,rel_err"
    assert "\r" not in text


def test_moment_rate(tmp_path):
    cfg = {"experiment": "moment_rate", "gamma": 1, "table": {"r": [100], "w": 1e-6},
           "tolerances": {"length_small_rel": 0.02}}
    code, s = run(tmp_path, cfg, "oracle")
    assert code == 0


def test_jump_law(tmp_path):
    cfg = {"experiment": "jump_law", "model": IID, "scheme": {"r": 200, "w": 2.5e-4},
           "replications": {"n_rep": 100_000}, "seed": 3}
    code, s = run(tmp_path, cfg, "jump-law")
    assert code == 0 and s["outputs"]["ks_first"] < 0.02
    assert (tmp_path / "out" / "jump_ecdf.csv").exists()


@pytest.mark.parametrize("cfg", [
    {"experiment": "jump_law", "model": IID, "scheme": {"r": -3, "w": 0.1}},
    {"experiment": "jump_law", "model": IID, "scheme": {"r": 3, "w": 0.1}, "colour": "red"},
    {"experiment": "jump_law", "model": {"model": "moving_max"}, "scheme": {"r": 3, "w": 0.1}},
    {"experiment": "consistency", "model": IID, "scheme": {"n": 10, "r": 20, "w": 0.1}},
    {"experiment": "jump_law", "model": IID, "scheme": {"r": 3, "w": 0.1, "u": 3.0}},
    {"experiment": "consistency", "model": IID, "scheme": {"n": 100, "r": 10, "w": 0.1}, "functionals": ["bogus"]},
])
def test_invalid_config_exit_2(tmp_path, cfg, capsys):
    code, _ = run(tmp_path, cfg, "jump-law" if cfg["experiment"] == "jump_law" else "estimate")
    assert code == 2
    assert "config error" in capsys.readouterr().err


def test_wrong_subcommand_and_bad_json(tmp_path):
    code, _ = run(tmp_path, {"experiment": "oracle_table"}, "sweep")
    assert code == 2
    p = tmp_path / "bad.json"
    p.write_text("{nope")
    assert main(["oracle", "--config", str(p)]) == 2


def test_tolerance_failure_exit_1(tmp_path, capsys):
    cfg = {"experiment": "jump_law", "model": IID, "scheme": {"r": 200, "w": 2.5e-4},
           "replications": {"n_rep": 1000}, "tolerances": {"ks": 1e-6}}
    code, s = run(tmp_path, cfg, "jump-law")
    assert code == 1 and not s["pass"] and s["failures"]
    assert "FAIL" in capsys.readouterr().err


def test_byte_identical_reruns(tmp_path):
    cfg = {"experiment": "process_clt", "process": "G_tilde", "model": IID,
           "scheme": {"n": 10**6, "r": 10, "w": 1e-3}, "functionals": ["ei", "length"],
           "replications": {"n_rep": 120}, "seed": 11}
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    snap = {}
    for workers in ("1", "2"):
        for attempt in range(2):
            assert main(["clt", "--config", str(p), "--out", str(tmp_path / "a"), "--workers", workers]) == 0
            snap[workers, attempt] = {f: (tmp_path / "a" / f).read_bytes() for f in ("summary.json", "replicates.csv")}
    assert snap["1", 0] == snap["1", 1]
    assert snap["2", 0] == snap["2", 1]
    # replicate values do not depend on the worker count
    assert snap["1", 0]["replicates.csv"] == snap["2", 0]["replicates.csv"]
    assert json.loads((tmp_path / "a" / "runtime.json").read_text())["seconds"] >= 0


def test_seed_flag_and_env(tmp_path, monkeypatch):
    cfg = {"experiment": "simulate", "model": IID, "scheme": {"n": 50}}
    monkeypatch.setenv("CLUSTERLAB_SEED", "42")
    _, s = run(tmp_path, cfg, "simulate", out="e")
    assert s["config"]["seed"] == 42
    _, s = run(tmp_path, cfg, "simulate", "--seed", "5", out="f")
    assert s["config"]["seed"] == 5
    assert (tmp_path / "e" / "series.csv").read_text() != (tmp_path / "f" / "series.csv").read_text()


def test_json_format(tmp_path):
    cfg = {"experiment": "simulate", "model": {"model": "ar1", "alpha": 1, "phi": 0.5}, "scheme": {"n": 20, "w": 0.1}}
    code, s = run(tmp_path, cfg, "simulate", "--format", "json")
    data = json.loads((tmp_path / "out" / "series.json").read_text())
    assert code == 0 and data["columns"] == ["t", "x"] and len(data["rows"]) == 20
    assert s["outputs"]["w_model"] == pytest.approx(0.1)


def test_theta_and_diag(tmp_path):
    cfg = {"experiment": "theta_hat", "model": {"model": "moving_max", "alpha": 1, "weights": [1, 1]},
           "scheme": {"n": 10**6, "r": 100, "w": 1e-4}, "replications": {"n_paths": 100_000, "n_blocks": 500_000, "n_rep": 3},
           "tolerances": {"abs": 0.2}}
    code, s = run(tmp_path, cfg, "theta")
    assert code == 0 and s["targets"]["theta_exact"] == 0.5
    cfg = {"experiment": "anticluster_diag", "model": IID, "scheme": {"r": 20, "w": 0.01}, "ell": [1, 10],
           "replications": {"n_rep": 10_000}}
    code, s = run(tmp_path, cfg, "diag", out="d")
    assert code == 0 and len(s["outputs"]["rows"]) == 2


def test_estimate_simulated(tmp_path):
    cfg = {"experiment": "consistency", "model": {"model": "moving_max", "alpha": 1, "weights": [1, 1]},
           "scheme": {"n": 10**6, "r": 100, "w": 1e-3}, "functionals": ["ei", "tmax_pow(1)"],
           "replications": {"n_rep": 10, "n_paths": 100_000}, "seed": 2}
    code, s = run(tmp_path, cfg, "estimate")
    assert code == 0, s["failures"]
    assert s["targets"]["tmax_pow(1)"]["value"] == 0.25


def test_estimate_on_csv(tmp_path):
    x = np.abs(np.random.default_rng(0).standard_cauchy(10_000))
    p = tmp_path / "x.csv"
    p.write_text("x\n" + "\n".join(repr(float(v)) for v in x) + "\n")
    cfg = {"experiment": "consistency", "series_csv": str(p), "scheme": {"r": 50, "k": 100}, "functionals": ["ei"]}
    code, s = run(tmp_path, cfg, "estimate")
    assert code == 0 and 0 < s["outputs"]["ei"] <= 1 and s["outputs"]["w"] == 0.01


def test_sweep(tmp_path):
    cfg = {"experiment": "sweep", "model": IID, "gamma": 1, "scheme": {"n": 10**8, "w": 1e-4},
           "r_rule": {"kind": "list", "values": [5, 10, 30, 200, 300]}}
    code, s = run(tmp_path, cfg, "sweep")
    assert code == 0
    assert s["outputs"]["regimes"] == ["small", "small", "moderate", "large", "large"]
    cfg["r_rule"] = {"kind": "n_pow", "exponents": [0.1, 0.2]}
    code, s = run(tmp_path, cfg, "sweep", out="b")
    assert s["outputs"]["r"] == [6, 39]


def test_regime_tags():
    tags = [block_regime(r, 1e-4, 1.0) for r in range(1, 400)]
    order = {"small": 0, "moderate": 1, "large": 2}
    assert all(order[a] <= order[b] for a, b in zip(tags, tags[1:]))
    assert "moderate" not in [block_regime(r, 1e-4, 0.0) for r in range(1, 100_000, 7)]


def test_ingest_csv(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("1\n2\n3\n")
    w = ingest_csv(p)
    assert len(w) == 3 and w.dim == 1 and w.values[:, 0].tolist() == [1, 2, 3]
    p.write_text("a,b\n3,4\n0,1\n")
    w = ingest_csv(p)
    assert w.dim == 2
    from clusterlab.core import NormSpec

    assert w.norms(NormSpec("sup")).tolist() == [4, 1]
    p.write_text("")
    with pytest.raises(IngestError):
        ingest_csv(p)
    p.write_text("1,2\n3\n")
    with pytest.raises(IngestError, match=":2:"):
        ingest_csv(p)
    p.write_text("1\nx\n")
    with pytest.raises(IngestError, match=":2: non-numeric"):
        ingest_csv(p)


def test_csv_float_roundtrip(tmp_path):
    vals = [0.1, 1 / 3, 1e-300, 123456789.123456789]
    p = tmp_path / "f.csv"
    write_csv(p, ["v"], [[v] for v in vals])
    back = [float(x) for x in p.read_text().splitlines()[1:]]
    assert back == vals
    assert fmt(0.1) == "0.10000000000000001"


def test_resolve_defaults():
    cfg = resolve({"experiment": "oracle_table"}, workers=3)
    assert cfg["workers"] == 3 and cfg["output"] == {"dir": ".", "format": "csv"}
    with pytest.raises(ConfigError):
        validate({"experiment": "nope"})


def test_schema_command(capsys):
    assert main(["schema"]) == 0
    assert json.loads(capsys.readouterr().out)["required"] == ["experiment"]
