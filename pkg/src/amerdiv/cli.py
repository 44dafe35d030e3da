"""Command-line front end.

Runs pricing / boundary / density / implied / compare jobs described by a
JSON config file and writes CSV curves plus a JSON report into an output
directory.  The config is fully validated before any file is written, so
a malformed config can never leave partial outputs behind.

Exit codes: 0 success, 1 config error, 2 numerical failure (a
diagnostics JSON is written in the latter case).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .baseline import tree_boundary, tree_price
from .boundary import BoundarySolveError, solve_boundary
from .deamericanize import (NoSolutionError, implied_sigma,
                            implied_strike_batch, read_quotes_csv)
from .density import DensityPath
from .model import MarketModel, OptionSpec
from .pricer import price_american

__all__ = ["main", "run", "ConfigError"]

COMMANDS = ("price", "boundary", "density", "implied", "implied-strike",
            "compare")

_TOP_KEYS = {"command", "model", "option", "numerics", "market_price",
             "quotes", "density_time", "output_prefix"}
_NUMERIC_KEYS = {"N", "n_x", "tree_steps", "tree_mode", "density_n_x",
                 "sigma_bracket"}


class ConfigError(ValueError):
    """Malformed or incomplete job config."""


def _fmt(v: float) -> str:
    return f"{float(v):.10g}"


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_overrides(cfg: dict, sets: list[str]) -> dict:
    for item in sets:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, val = item.partition("=")
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot override through non-mapping {p!r}")
        node[parts[-1]] = _parse_value(val)
    return cfg


def _load_config(path: str, sets: list[str]) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return _apply_overrides(cfg, sets)


class Job:
    """Validated job: everything needed to run, no files touched yet."""

    def __init__(self, cfg: dict):
        unknown = set(cfg) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        self.command = cfg.get("command")
        if self.command not in COMMANDS:
            raise ConfigError(
                f"command must be one of {COMMANDS}, got {self.command!r}")
        try:
            self.model = MarketModel.from_dict(cfg.get("model", {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad model block: {exc}") from exc
        opt = dict(cfg.get("option", {}))
        unknown = set(opt) - {"kind", "strike", "maturity", "spot"}
        if unknown:
            raise ConfigError(f"unknown option keys: {sorted(unknown)}")
        try:
            self.spec = OptionSpec(
                kind=opt.get("kind", "Put"),
                strike=float(opt.get("strike", 100.0)),
                maturity=float(opt.get("maturity", 1.0)),
                spot=float(opt.get("spot", opt.get("strike", 100.0))),
            )
            self.model.validate(self.spec.maturity)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad option block: {exc}") from exc
        num = dict(cfg.get("numerics", {}))
        unknown = set(num) - _NUMERIC_KEYS
        if unknown:
            raise ConfigError(f"unknown numerics keys: {sorted(unknown)}")
        self.N = int(num.get("N", 100))
        self.n_x = int(num.get("n_x", 2001))
        self.tree_steps = int(num.get("tree_steps", 3000))
        self.tree_mode = str(num.get("tree_mode", "lumpsum"))
        if self.tree_mode not in ("lumpsum", "shift"):
            raise ConfigError("numerics.tree_mode must be lumpsum or shift")
        self.density_n_x = int(num.get("density_n_x", 2001))
        self.sigma_bracket = tuple(num.get("sigma_bracket", (0.01, 3.0)))
        self.market_price = cfg.get("market_price")
        self.quotes_path = cfg.get("quotes")
        self.density_time = cfg.get("density_time")
        self.prefix = str(cfg.get("output_prefix", self.command))
        if self.command == "implied" and self.market_price is None:
            raise ConfigError("command 'implied' requires market_price")
        if self.command == "implied-strike":
            if self.quotes_path is None:
                raise ConfigError("command 'implied-strike' requires quotes")
            if not Path(self.quotes_path).is_file():
                raise ConfigError(f"quotes file not found: {self.quotes_path}")


def _write_report(out: Path, prefix: str, report: dict) -> Path:
    path = out / f"{prefix}_report.json"
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _boundary_rows(curve):
    rows = []
    for i in range(len(curve.tau)):
        status = curve.status if curve.node_ok[i] else "failed"
        rows.append([_fmt(curve.t[i]), _fmt(curve.tau[i]), _fmt(curve.y[i]),
                     _fmt(curve.S_B[i]), status, int(curve.div_flags[i])])
    return rows


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _run_price(job: Job, out: Path) -> dict:
    rep = price_american(job.model, job.spec, N=job.N, n_x=job.n_x)
    report = {k: (v if isinstance(v, str) else float(v))
              for k, v in rep.as_dict().items()}
    report["command"] = "price"
    if rep.boundary.exists:
        path = out / f"{job.prefix}_boundary.csv"
        _write_csv(path, ["t", "tau", "y", "S_B", "status",
                          "is_dividend_node"], _boundary_rows(rep.boundary))
        report["boundary_csv"] = path.name
    return report


def _run_boundary(job: Job, out: Path) -> dict:
    curve = solve_boundary(job.model, job.spec, N=job.N)
    path = out / f"{job.prefix}_boundary.csv"
    _write_csv(path, ["t", "tau", "y", "S_B", "status", "is_dividend_node"],
               _boundary_rows(curve))
    return {"command": "boundary", "status": curve.status,
            "n_nodes": int(len(curve.tau)),
            "n_failed": int((~curve.node_ok).sum()) if curve.exists else 0,
            "boundary_csv": path.name}


def _run_density(job: Job, out: Path) -> dict:
    t = float(job.density_time if job.density_time is not None
              else job.spec.maturity)
    if not 0.0 < t <= job.spec.maturity:
        raise ConfigError("density_time must lie in (0, maturity]")
    dp = DensityPath(job.model, job.spec.spot, job.spec.maturity,
                     n_x=job.density_n_x)
    lo = job.spec.spot * 0.05
    hi = job.spec.spot * 3.0
    s = np.linspace(lo, hi, 601)
    p = dp.density(t, s)
    path = out / f"{job.prefix}_density.csv"
    _write_csv(path, ["s", "p"], ([_fmt(a), _fmt(b)] for a, b in zip(s, p)))
    return {"command": "density", "t": t, "mass": float(dp.mass(t)),
            "mean": float(dp.mean(t)), "density_csv": path.name}


def _run_implied(job: Job, out: Path) -> dict:
    res = implied_sigma(float(job.market_price), job.model, job.spec,
                        N=job.N, bracket=job.sigma_bracket)
    return {"command": "implied", "market_price": float(job.market_price),
            "sigma_bar": res.sigma_bar,
            "equivalent_european": res.equivalent_european,
            "iterations": res.iterations, "residual": res.residual}


def _run_implied_strike(job: Job, out: Path) -> dict:
    quotes = read_quotes_csv(job.quotes_path)
    results = implied_strike_batch(quotes, job.model, job.spec.spot)
    path = out / f"{job.prefix}_implied_strikes.csv"
    _write_csv(path, ["K", "T", "price", "kind", "x", "implied_strike"],
               ([_fmt(r.quote[0]), _fmt(r.quote[1]), _fmt(r.quote[2]),
                 r.quote[3], _fmt(r.x), _fmt(r.strike)] for r in results))
    return {"command": "implied-strike", "n_quotes": len(results),
            "strikes_csv": path.name,
            "max_residual": max((abs(r.residual) for r in results),
                                default=0.0)}


def _run_compare(job: Job, out: Path) -> dict:
    curve = solve_boundary(job.model, job.spec, N=job.N)
    tr = tree_boundary(job.model, job.spec, n_time=job.tree_steps,
                       dividend_mode=job.tree_mode)
    git_path = out / f"{job.prefix}_boundary_git.csv"
    _write_csv(git_path, ["t", "tau", "y", "S_B", "status",
                          "is_dividend_node"], _boundary_rows(curve))
    tree_path = out / f"{job.prefix}_boundary_tree.csv"
    _write_csv(tree_path, ["t", "S_B"],
               ([_fmt(a), _fmt(b)] for a, b in zip(tr.times, tr.boundary)
                if np.isfinite(b)))

    report = {"command": "compare", "status": curve.status,
              "boundary_git_csv": git_path.name,
              "boundary_tree_csv": tree_path.name}
    if curve.exists:
        # interpolate the tree boundary onto the solver's node times,
        # excluding the 3 nodes closest to expiry (lattice noise there)
        good_t = tr.times[np.isfinite(tr.boundary)]
        good_b = tr.boundary[np.isfinite(tr.boundary)]
        order = np.argsort(curve.t)
        tq = curve.t[order][:-3] if len(curve.t) > 3 else curve.t[order]
        sq = curve.S_B[order][: len(tq)]
        keep = np.isfinite(sq)
        tq, sq = tq[keep], sq[keep]
        if len(good_t) >= 2 and len(tq):
            tree_q = np.interp(tq, good_t, good_b)
            rel = np.abs(sq - tree_q) / job.spec.strike
            plot_path = out / f"{job.prefix}_plot_data.csv"
            _write_csv(plot_path, ["t", "S_B_git", "S_B_tree"],
                       ([_fmt(a), _fmt(b), _fmt(c)]
                        for a, b, c in zip(tq, sq, tree_q)))
            report.update({"max_rel_dev": float(rel.max()),
                           "mean_rel_dev": float(rel.mean()),
                           "n_compared": int(len(tq)),
                           "plot_data_csv": plot_path.name})
        else:
            report["max_rel_dev"] = None
    return report


_RUNNERS = {
    "price": _run_price,
    "boundary": _run_boundary,
    "density": _run_density,
    "implied": _run_implied,
    "implied-strike": _run_implied_strike,
    "compare": _run_compare,
}


def run(config_path: str, sets: list[str] | None = None,
        out_dir: str = ".", fmt: str = "json") -> int:
    """Execute one job; returns the process exit code."""
    try:
        cfg = _load_config(config_path, sets or [])
        job = Job(cfg)
        if fmt not in ("csv", "json"):
            raise ConfigError("--format must be csv or json")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        report = _RUNNERS[job.command](job, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (BoundarySolveError, NoSolutionError, FloatingPointError,
            np.linalg.LinAlgError, ValueError) as exc:
        diag = {"command": job.command, "error": type(exc).__name__,
                "message": str(exc)}
        _write_report(out, f"{job.prefix}_failure", diag)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2

    _write_report(out, job.prefix, report)
    if fmt == "json":
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        keys = sorted(report)
        print(",".join(keys))
        print(",".join(_fmt(report[k]) if isinstance(report[k], float)
                       else str(report[k]) for k in keys))
    return 0


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(
        prog="amerdiv",
        description="American-option pricing jobs from JSON configs")
    ap.add_argument("--config", required=True, help="path to job config")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VAL",
                    help="override a config entry (dotted path)")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--format", default="json", choices=("csv", "json"),
                    help="stdout summary format")
    args = ap.parse_args(argv)
    return run(args.config, args.set, args.out, args.format)


if __name__ == "__main__":
    sys.exit(main())
