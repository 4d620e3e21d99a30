"""``beamlab run`` and ``beamlab validate``.

Exit codes: 0 all checks passed, 2 configuration error, 3 numeric failure or a
failed check.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import BeamlabError, ConfigError
from .scenarios import SCENARIOS, Param

EXIT_OK, EXIT_CONFIG, EXIT_FAIL = 0, 2, 3
TOP_KEYS = ("scenario", "params", "out")


def _range_text(p: Param) -> str:
    if p.choices is not None:
        return "{" + ", ".join(map(str, p.choices)) + "}"
    lo = "-inf" if p.lo is None else f"{p.lo:g}"
    hi = "inf" if p.hi is None else f"{p.hi:g}"
    return ("(" if p.open_interval or p.lo is None else "[") + f"{lo}, {hi}" + (")" if p.open_interval or p.hi is None else "]")


def _check_number(name: str, v, p: Param):
    ok = True
    if p.lo is not None:
        ok &= v > p.lo if p.open_interval else v >= p.lo
    if p.hi is not None:
        ok &= v < p.hi if p.open_interval else v <= p.hi
    if not ok:
        raise ConfigError(f"{name}={v:g} out of range: {name} ∈ {_range_text(p)}")


def _coerce(name: str, v, p: Param):
    if p.kind == "floats":
        if not isinstance(v, list) or not v:
            raise ConfigError(f"{name}: expected a non-empty list of numbers")
        return [_coerce(name, x, Param(None, "float", p.lo, p.hi, p.open_interval)) for x in v]
    if p.kind == "int":
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{name}: expected an integer, got {v!r}")
    elif p.kind == "float":
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"{name}: expected a finite number, got {v!r}")
        v = float(v)
    elif p.kind == "str" and not isinstance(v, str):
        raise ConfigError(f"{name}: expected a string, got {v!r}")
    if p.choices is not None:
        if v not in p.choices:
            raise ConfigError(f"{name}={v!r} out of range: {name} ∈ {_range_text(p)}")
    elif p.kind in ("int", "float"):
        _check_number(name, v, p)
    return v


def parse_config_text(text: str) -> dict:
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("top level must be a JSON object")
    return cfg


def validate_config(cfg: dict) -> tuple[dict, list[str]]:
    """Return the normalized config and notices for every default that was filled in."""
    unknown = sorted(set(cfg) - set(TOP_KEYS))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown}; allowed: {list(TOP_KEYS)}")
    name = cfg.get("scenario")
    if name not in SCENARIOS:
        raise ConfigError(f"scenario={name!r} unknown; choose one of {sorted(SCENARIOS)}")
    spec, _ = SCENARIOS[name]
    given = cfg.get("params", {})
    if not isinstance(given, dict):
        raise ConfigError("params must be a JSON object")
    unknown = sorted(set(given) - set(spec))
    if unknown:
        raise ConfigError(f"unknown parameter(s) {unknown} for scenario {name}; allowed: {sorted(spec)}")
    params, notices = {}, []
    for key, p in spec.items():
        if key in given:
            params[key] = _coerce(key, given[key], p)
        else:
            params[key] = p.default
            notices.append(f"{key} not given; using default {p.default!r}")
    out = cfg.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigError("out must be a string path")
    return {"scenario": name, "params": params, "out": out}, notices


def load_config(path) -> tuple[dict, list[str]]:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    return validate_config(parse_config_text(text))


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": float(v.real), "im": float(v.imag)}
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def _write_csv(path: Path, rows: list[dict]):
    if not rows:
        return
    cols = list(rows[0])
    for r in rows[1:]:
        cols += [c for c in r if c not in cols]
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow({k: json.dumps(_plain(v)) if isinstance(v, (dict, list)) else _plain(v) for k, v in r.items()})


def run_scenario(config: dict, jobs: int = 1):
    spec, fn = SCENARIOS[config["scenario"]]
    return fn(config["params"], jobs=jobs)


def write_bundle(out_dir: Path, config: dict, outcome, notices: list[str], wall: float) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {"scenario": config["scenario"], "params": config["params"],
              "passed": all(c.passed for c in outcome.checks),
              "checks": [c.to_dict() for c in outcome.checks], "results": outcome.results}
    report = _plain(report)
    (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    for name, rows in outcome.tables.items():
        _write_csv(out_dir / f"{name}.csv", rows)
    meta = {"version": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "wall_time_s": wall, "params": _plain(config["params"]), "notices": notices}
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return report


def _cmd_validate(args) -> int:
    config, notices = load_config(args.config)
    for n in notices:
        print(f"notice: {n}")
    print(f"ok: scenario {config['scenario']}")
    return EXIT_OK


def _cmd_run(args) -> int:
    config, notices = load_config(args.config)
    if args.verbose:
        for n in notices:
            print(f"notice: {n}", file=sys.stderr)
    out_dir = Path(args.out or config["out"] or f"out-{config['scenario']}")
    t0 = time.perf_counter()
    outcome = run_scenario(config, jobs=args.jobs)
    report = write_bundle(out_dir, config, outcome, notices, time.perf_counter() - t0)
    for c in report["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']} = {c['value']:.6g} ({c['threshold']})")
    print(f"wrote {out_dir}")
    return EXIT_OK if report["passed"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="beamlab", description="Gaussian beam and inverse-problem experiments.")
    ap.add_argument("--version", action="version", version=f"beamlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario and write report.json, CSV tables and meta.json")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (overrides the config)")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for independent sub-runs")
    run.add_argument("--verbose", action="store_true")
    run.set_defaults(func=_cmd_run)
    val = sub.add_parser("validate", help="check a config file without running it")
    val.add_argument("config")
    val.set_defaults(func=_cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "jobs", 1) < 1:
            raise ConfigError(f"jobs={args.jobs} out of range: jobs ∈ [1, inf)")
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (BeamlabError, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"numeric failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
