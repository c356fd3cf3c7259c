"""Command line runner: ``clusterlab <subcommand> --config PATH``.

Exit codes: 0 when every declared tolerance passes, 1 on a tolerance or
numerical failure, 2 on an invalid config.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from clusterlab import config as _cfg
from clusterlab import kernels
from clusterlab.core import SchemeError
from clusterlab.experiments import RUNNERS
from clusterlab.functionals import UnknownFunctional
from clusterlab.generators import ModelError
from clusterlab.io import write_csv, write_json

SUBCOMMANDS = {
    "oracle": ("oracle_table", "moment_rate"),
    "simulate": ("simulate",),
    "estimate": ("consistency",),
    "jump-law": ("jump_law",),
    "clt": ("process_clt",),
    "theta": ("theta_hat",),
    "diag": ("anticluster_diag",),
    "sweep": ("sweep",),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clusterlab", description="Blocks estimators and cluster process experiments")
    sub = p.add_subparsers(dest="command", required=True)
    for name, kinds in SUBCOMMANDS.items():
        s = sub.add_parser(name, help=f"run a {' or '.join(kinds)} experiment")
        s.add_argument("--config", required=True, help="JSON experiment config")
        s.add_argument("--seed", type=int, help="root seed (falls back to CLUSTERLAB_SEED)")
        s.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
        s.add_argument("--out", help="output directory")
        s.add_argument("--format", choices=["csv", "json"], help="format of detail files")
    sub.add_parser("schema", help="print the config JSON schema")
    return p


def _write_tables(out: Path, fmt: str, tables: dict) -> list[str]:
    files = []
    for name, (header, rows) in tables.items():
        if fmt == "csv":
            path = out / f"{name}.csv"
            write_csv(path, header, rows)
        else:
            path = out / f"{name}.json"
            recs = [r if isinstance(r, dict) else dict(zip(header, r)) for r in rows]
            write_json(path, {"columns": header, "rows": [[rec.get(h) for h in header] for rec in recs]})
        files.append(path.name)
    return files


def run(cfg: dict, command: str | None = None) -> int:
    """Run a resolved config; returns the exit code."""
    kind = cfg["experiment"]
    if command is not None and kind not in SUBCOMMANDS[command]:
        print(f"config error: experiment {kind!r} does not belong to subcommand {command!r}", file=sys.stderr)
        return 2
    out = Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        result = RUNNERS[kind](cfg)
    except _cfg.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        for msg in e.errors:
            print(f"  {msg}", file=sys.stderr)
        return 2
    except (SchemeError, ModelError, UnknownFunctional) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, RuntimeError) as e:
        write_json(out / "summary.json", {"config": cfg, "pass": False, "error": f"{type(e).__name__}: {e}"})
        print(f"numerical failure: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    files = _write_tables(out, cfg["output"]["format"], result.tables)
    summary = {
        "config": cfg,
        "experiment": kind,
        "outputs": result.outputs,
        "targets": result.targets,
        "pass": result.passed,
        "failures": result.failures,
        "files": files,
    }
    write_json(out / "summary.json", summary)
    # wall time kept apart so that summary.json is reproducible byte for byte
    write_json(out / "runtime.json", {"seconds": time.perf_counter() - t0, "backend": kernels.BACKEND,
                                     "workers": cfg["workers"]})
    for f in result.failures:
        print(f"FAIL {json.dumps(f, default=float)}", file=sys.stderr)
    return 0 if result.passed else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "schema":
        print(json.dumps(_cfg.SCHEMA, indent=2))
        return 0
    try:
        raw = _cfg.load(args.config)
        if not isinstance(raw, dict):
            raise _cfg.ConfigError("invalid config", ["<root>: expected a JSON object"])
        raw.setdefault("experiment", SUBCOMMANDS[args.command][0])
        workers = args.workers if args.workers is not None else raw.get("workers", os.cpu_count() or 1)
        cfg = _cfg.resolve(raw, seed=args.seed, workers=workers, out=args.out, fmt=args.format)
    except _cfg.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        for msg in e.errors:
            print(f"  {msg}", file=sys.stderr)
        return 2
    return run(cfg, args.command)


if __name__ == "__main__":
    sys.exit(main())
