"""Command-line entry point.

    spectral-picard verify-lemmas [--config PATH] [--seed N]
    spectral-picard solve --problem small-swirl [--max-iter N] [--tol X] [--mode-box K] [--time-grid "T,M"]
    spectral-picard feasibility --config PATH
    spectral-picard constants --config PATH
    spectral-picard export --report PATH [--series residuals]

Exit status: 0 when every check passes (or the solve converged), 1 on a
failed check or a hard error, 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis_kernels import DoubleFactorialTable
from .constants_feasibility import (DataConstants, GaussianExpansion, coupled_constants, coupled_margin,
                                    data_constants, feasibility_search, ns_condition)
from .picard_engine import (CONVERGED, best_margin_containing, best_radius, data_size, feasible_radius_interval,
                            iterate, kappa_prime)
from .problems import load_problem, read_problem_document
from .propagators import PhysicsParams
from .reports import SERIES, Check, RunReport, digest, emit_csv_series
from .spectral_core import field_to_dict
from .suites import SUITES

log = logging.getLogger("spectral_picard")

CONFIG_VERSION = 1
COMMANDS = ("verify-lemmas", "solve", "feasibility", "constants", "export")

_TOP_KEYS = {"schema_version", "command", "problem", "out", "seed", "max_iter", "tol", "mode_box", "time_grid",
             "format", "suites", "sizes", "double_factorial_minus_one", "feasibility", "constants", "export"}
_SIZE_KEYS = {"moment_k_max", "moment_multi_samples", "ratio_n_max", "ratio_entry_max", "sphere_n_max",
              "transport_instances", "closure_instances"}
_FEAS_KEYS = {"mode", "n", "nu", "kappa", "B", "data", "expansions", "C", "D", "decades", "points_per_decade",
              "refine_steps", "problem"}
_CONST_KEYS = {"n", "nu", "kappa", "B", "data", "C", "D"}
_EXPORT_KEYS = {"report", "series"}
_EXPANSION_FIELDS = {"phi", "eta", "f", "g"}


class ConfigError(ValueError):
    """Malformed configuration or command line; exit status 2."""


def _unknown(doc: dict, allowed: set, where: str) -> None:
    extra = set(doc) - allowed
    if extra:
        raise ConfigError(f"unknown {where} keys: {sorted(extra)}")


def _number(doc, key, lo=None, hi=None, integer=False, default=None):
    v = doc.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number")
    if integer and int(v) != v:
        raise ConfigError(f"{key} must be an integer")
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(f"{key}={v} outside [{lo}, {hi}]")
    return int(v) if integer else float(v)


def parse_time_grid(text) -> tuple[float, int]:
    try:
        if isinstance(text, str):
            t_max, m = text.split(",")
        else:
            t_max, m = text
        t_max, m = float(t_max), int(m)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"time grid must be 'T_max,M', got {text!r}") from exc
    if not (t_max > 0 and 1 <= m <= 100_000):
        raise ConfigError("time grid needs T_max > 0 and 1 <= M <= 100000")
    return t_max, m


def load_config(path: str | None, command: str) -> dict:
    """Read and validate a JSON config; returns a plain dict of settings."""
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _unknown(doc, _TOP_KEYS, "config")
    if doc.get("schema_version") != CONFIG_VERSION:
        raise ConfigError(f"config schema_version must be {CONFIG_VERSION}")
    if "command" in doc and doc["command"] != command:
        raise ConfigError(f"config is for command {doc['command']!r}, not {command!r}")
    _unknown(doc.get("sizes", {}), _SIZE_KEYS, "sizes")
    _unknown(doc.get("feasibility", {}), _FEAS_KEYS, "feasibility")
    _unknown(doc.get("constants", {}), _CONST_KEYS, "constants")
    _unknown(doc.get("export", {}), _EXPORT_KEYS, "export")
    for k, v in doc.get("sizes", {}).items():
        _number(doc["sizes"], k, lo=0, hi=10_000, integer=True)
    if "suites" in doc:
        if not isinstance(doc["suites"], list) or set(doc["suites"]) - set(SUITES):
            raise ConfigError(f"suites must be a list drawn from {sorted(SUITES)}")
    _number(doc, "max_iter", lo=1, hi=100_000, integer=True)
    _number(doc, "tol", lo=0, hi=1e6)
    _number(doc, "seed", lo=0, integer=True)
    _number(doc, "double_factorial_minus_one", integer=True)
    if "time_grid" in doc:
        parse_time_grid(doc["time_grid"])
    if doc.get("format", "json") not in ("json", "csv"):
        raise ConfigError("format must be json or csv")
    base = Path(path).parent
    for holder, key in ((doc, "problem"), (doc.get("feasibility", {}), "problem")):
        if key in holder:
            holder[key] = _resolve_problem(holder[key], base)
    if "report" in doc.get("export", {}):
        p = Path(doc["export"]["report"])
        p = p if p.is_absolute() else base / p
        if not p.exists():
            raise ConfigError(f"report {p} not found")
        doc["export"]["report"] = str(p)
    return doc


def _resolve_problem(ref: str, base: Path = Path(".")) -> str:
    p = Path(ref)
    if p.suffix == ".json":
        p = p if p.is_absolute() else base / p
        if not p.exists():
            raise ConfigError(f"problem document {p} not found")
        return str(p)
    try:
        read_problem_document(ref)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from exc
    return ref


def _data_from(block: dict) -> DataConstants:
    """Data constants given directly (``data``) or via Gaussian expansions (``expansions``)."""
    values = dict(block.get("data", {}))
    unknown = set(values) - set(DataConstants.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown data constants {sorted(unknown)}")
    for name, entry in block.get("expansions", {}).items():
        if name not in _EXPANSION_FIELDS:
            raise ConfigError(f"expansions are keyed by {sorted(_EXPANSION_FIELDS)}")
        _unknown(entry, {"b", "n", "terms"}, f"expansion {name}")
        exp = GaussianExpansion(entry["b"], {tuple(t["beta"]): t["a"] for t in entry["terms"]}, entry["n"])
        for j in (0, 1):
            C, D = data_constants(exp, j)
            for key, v in ((f"C_{name}{j}", C), (f"D_{name}{j}", D)):
                if key in DataConstants.__dataclass_fields__:
                    values[key] = v
    try:
        return DataConstants(**{k: float(v) for k, v in values.items()})
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# commands

def run_verify_lemmas(cfg: dict) -> RunReport:
    rng = np.random.default_rng(cfg.get("seed", 0))
    table = DoubleFactorialTable(minus_one=cfg.get("double_factorial_minus_one", 1))
    report = RunReport("verify-lemmas")
    for name in cfg.get("suites", list(SUITES)):
        report.checks.extend(SUITES[name](cfg.get("sizes", {}), table, rng))
    report.exit_code = 0 if report.passed else 1
    return report


def run_solve(cfg: dict) -> RunReport:
    if "problem" not in cfg:
        raise ConfigError("solve needs a problem (path or fixture name)")
    tg = parse_time_grid(cfg["time_grid"]) if "time_grid" in cfg else None
    problem = load_problem(cfg["problem"], mode_box=cfg.get("mode_box"), time_grid=tg)
    report = RunReport("solve")
    if not problem.coupled:
        kp, A = kappa_prime(problem), data_size(problem)
        C = best_radius(A)
        interval = feasible_radius_interval(problem)
        margin = best_margin_containing(kp, A, 0.0)
        report.results["smallness"] = {"kappa_prime": kp, "data_size": A, "radius": C, "margin": margin,
                                       "holds": margin > 1, "interval": list(interval) if interval else None}
        if margin <= 1:
            report.warnings.append(f"smallness condition fails (best margin {margin:.6g}); convergence is empirical")
    result = iterate(problem, cfg.get("max_iter", 50), cfg.get("tol", 1e-8))
    names = ["iteration", "update_norm", "residual", "condition_margin", "contraction", "divergence_max",
             "anchor_error", "truncation_loss"]
    report.series = {k: result.series(k) for k in names}
    report.results["verdict"] = result.verdict
    report.results["iterations"] = result.iterations
    report.results["final_residual"] = result.final_residual
    report.warnings.extend(result.warnings)
    loss = max(report.series["truncation_loss"])
    if loss > 0:
        report.warnings.append(f"truncation dropped modes with l1 bound up to {loss:.6g}")
    div = max(report.series["divergence_max"])
    report.checks = [
        Check("fixed_point", result.verdict == CONVERGED, result.final_residual / cfg.get("tol", 1e-8),
              {"verdict": result.verdict, "iterations": result.iterations}),
        Check("divergence_free", div <= 1e-10, div / 1e-10, {"max_divergence_mode": div}),
        Check("pressure_anchor", max(report.series["anchor_error"]) <= 1e-10,
              max(report.series["anchor_error"]) / 1e-10, {}),
    ]
    state = result.state
    fields = {"u": [field_to_dict(c) for c in state.u], "p": field_to_dict(state.p.total())}
    if state.rho is not None:
        fields["rho"] = [field_to_dict(c) for c in state.rho]
        fields["h"] = [field_to_dict(c) for c in state.h]
    report.results["_fields"] = fields
    report.exit_code = 0 if report.passed else 1
    return report


def run_feasibility(cfg: dict) -> RunReport:
    block = dict(cfg.get("feasibility", {}))
    mode = block.get("mode", "coupled")
    report = RunReport("feasibility")
    if mode == "torus":
        ref = block.get("problem", cfg.get("problem"))
        if ref is None:
            raise ConfigError("torus feasibility needs a problem")
        problem = load_problem(ref)
        interval = feasible_radius_interval(problem)
        kp, A = kappa_prime(problem), data_size(problem)
        report.results = {"kappa_prime": kp, "data_size": A, "interval": list(interval) if interval else None}
        report.checks.append(Check("torus_interval", interval is not None,
                                   best_margin_containing(kp, A, 0.0), dict(report.results)))
    elif mode in ("coupled", "ns-rn"):
        n = _number(block, "n", integer=True, default=9)
        nu = _number(block, "nu", lo=0, default=1.0)
        data = _data_from(block)
        report.results["data"] = data.to_dict()
        if mode == "coupled":
            physics = PhysicsParams(nu=nu, kappa=_number(block, "kappa", lo=0, default=1.0),
                                    B=_number(block, "B", lo=0, default=0.0))
            kw = {}
            if "decades" in block:
                kw["decades"] = tuple(block["decades"])
            if "points_per_decade" in block:
                kw["points_per_decade"] = _number(block, "points_per_decade", lo=1, hi=1000, integer=True)
            if "refine_steps" in block:
                kw["refine_steps"] = _number(block, "refine_steps", lo=0, hi=200, integer=True)
            res = feasibility_search(data, physics, n, **kw)
            report.results["search"] = res.to_dict()
            report.checks.append(Check("coupled_feasibility", res.feasible, res.margin,
                                       {"C": res.C, "D": res.D}))
        else:
            C, D = _number(block, "C", lo=0), _number(block, "D", lo=0)
            if C is None or D is None:
                raise ConfigError("ns-rn feasibility needs C and D")
            pair = ns_condition(C, D, data, nu, n)
            report.results["condition"] = pair.to_dict()
            report.checks.append(Check("ns_condition", pair.holds, min(pair.margin_sup, pair.margin_integral),
                                       pair.to_dict()))
    else:
        raise ConfigError(f"unknown feasibility mode {mode!r}")
    report.exit_code = 0 if report.passed else 1
    return report


def run_constants(cfg: dict) -> RunReport:
    block = cfg.get("constants", {})
    n = _number(block, "n", integer=True, default=9)
    physics = PhysicsParams(nu=_number(block, "nu", lo=0, default=1.0), kappa=_number(block, "kappa", lo=0, default=1.0),
                            B=_number(block, "B", lo=0, default=0.0))
    C, D = _number(block, "C", lo=0, default=0.1), _number(block, "D", lo=0, default=0.1)
    data = _data_from(block)
    consts = coupled_constants(C, D, data, physics, n)
    margin = float(coupled_margin(C, D, data, physics, n))
    report = RunReport("constants", results={"C": C, "D": D, "n": n, "constants": consts.to_dict(),
                                             "data": data.to_dict()})
    report.checks.append(Check("coupled_condition", margin > 1, margin, consts.to_dict()))
    report.exit_code = 0
    return report


def run_export(cfg: dict) -> tuple[RunReport, str]:
    block = cfg.get("export", {})
    if "report" not in block:
        raise ConfigError("export needs a report path")
    src = RunReport.loads(Path(block["report"]).read_text())
    selector = block.get("series", "residuals")
    if selector not in SERIES:
        raise ConfigError(f"unknown series {selector!r}; choose from {sorted(SERIES)}")
    return src, emit_csv_series(src, selector)


# argument handling

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spectral-picard", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--seed", type=int)
        p.add_argument("--max-iter", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--mode-box", type=int)
        p.add_argument("--time-grid", help='"T_max,M": horizon and number of uniform intervals')
        p.add_argument("--format", choices=("json", "csv"))
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("solve", "feasibility"):
            p.add_argument("--problem", help="problem document path or fixture name")
        if name == "export":
            p.add_argument("--report", help="report document to export from")
            p.add_argument("--series", choices=sorted(SERIES))
        if name == "verify-lemmas":
            p.add_argument("--suite", action="append", choices=sorted(SUITES), help="run only these suites")
    return ap


def _merge(args, cfg: dict) -> dict:
    cfg = dict(cfg)
    for key in ("seed", "max_iter", "tol", "mode_box", "format", "out"):
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    if args.time_grid is not None:
        cfg["time_grid"] = parse_time_grid(args.time_grid)
    if getattr(args, "problem", None):
        cfg["problem"] = _resolve_problem(args.problem)
    if getattr(args, "suite", None):
        cfg["suites"] = args.suite
    if args.command == "export":
        block = dict(cfg.get("export", {}))
        if args.report:
            if not Path(args.report).exists():
                raise ConfigError(f"report {args.report} not found")
            block["report"] = args.report
        if args.series:
            block["series"] = args.series
        cfg["export"] = block
    if cfg.get("max_iter") is not None and cfg["max_iter"] < 1:
        raise ConfigError("max-iter must be at least 1")
    if cfg.get("tol") is not None and not cfg["tol"] > 0:
        raise ConfigError("tol must be positive")
    if cfg.get("mode_box") is not None and not 0 <= cfg["mode_box"] <= 64:
        raise ConfigError("mode-box must lie in [0, 64]")
    return cfg


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    config_text = Path(args.config).read_text() if args.config and Path(args.config).exists() else ""
    try:
        cfg = _merge(args, load_config(args.config, args.command))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    start = time.perf_counter()
    try:
        if args.command == "export":
            _, text = run_export(cfg)
            _write(text, cfg.get("out"))
            return 0
        runner = {"verify-lemmas": run_verify_lemmas, "solve": run_solve, "feasibility": run_feasibility,
                  "constants": run_constants}[args.command]
        report = runner(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OverflowError, FileNotFoundError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return 1

    report.wall_clock_s = time.perf_counter() - start
    problem_text = ""
    if "problem" in cfg:
        problem_text = json.dumps(read_problem_document(cfg["problem"]), sort_keys=True)
    settings = {k: v for k, v in cfg.items() if k != "out"}
    report.input_digest = digest(args.command, config_text, json.dumps(settings, sort_keys=True, default=str),
                                 problem_text)

    fields = report.results.pop("_fields", None)
    out = cfg.get("out")
    if fields is not None and out:
        Path(out).with_suffix(".fields.json").write_text(json.dumps(fields))
        report.results["fields_path"] = str(Path(out).with_suffix(".fields.json"))
    if cfg.get("format") == "csv":
        if not report.series:
            print("error: csv output needs an iteration series (solve reports only)", file=sys.stderr)
            return 2
        _write(emit_csv_series(report, "residuals"), out)
    else:
        _write(report.dumps(), out)
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} margin={c.margin:.6g}", file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
