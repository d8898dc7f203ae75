"""Command-line front door.

Subcommands
-----------
simulate    generate fBm or model paths to CSV/binary dumps
experiment  run a Monte Carlo experiment from a JSON config; writes
            report.json, replicates.csv and rendered figures; exit code 0
            iff every gated criterion passed
test        studentized test of zero cross-loadings on imported data;
            prints a one-line JSON verdict
constants   print tables of the autocovariance, rates and limit constants

The default output directory is the CROSSVAR_OUTDIR environment variable
(falling back to the current directory).  All commands are non-interactive.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, config_digest, load_config
from .experiments import run_experiment
from .fbm import (
    HurstParams,
    PathMeta,
    SamplePath,
    fgn_autocovariance,
    generate_bivariate_fbm,
    generate_fbm_path,
    uniform_grid,
)
from .htest import UnsupportedRegimeError, test_zero_cross
from .io import (
    RunManifest,
    read_increment_csv,
    read_path_binary,
    write_path_binary,
    write_path_csv,
    write_replicates_csv,
    write_report_json,
)
from .stats import c_constant, rate_a_n
from .young import young_constant

__all__ = ["main"]


def _default_outdir() -> str:
    return os.environ.get("CROSSVAR_OUTDIR", ".")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="crossvar",
        description="cross-variation laboratory for fBm-driven Young models")
    p.add_argument("--version", action="version", version=f"crossvar {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="generate fBm paths to files")
    ps.add_argument("--hurst", type=float, required=True, help="Hurst index in (0,1)")
    ps.add_argument("--n", type=int, required=True, help="grid intervals")
    ps.add_argument("--horizon", type=float, default=1.0, help="time horizon T")
    ps.add_argument("--seed", type=int, default=0, help="master seed")
    ps.add_argument("--components", type=int, choices=(1, 2), default=2)
    ps.add_argument("--format", choices=("csv", "bin", "both"), default="both")
    ps.add_argument("--out", default=None, help="output directory")

    pe = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    pe.add_argument("--config", required=True, help="JSON config file")
    pe.add_argument("--out", default=None, help="output directory")
    pe.add_argument("--workers", type=int, default=1,
                    help="worker processes (results are worker-count independent)")
    pe.add_argument("--no-figures", action="store_true",
                    help="skip figure rendering")
    pe.add_argument("--dry-run", action="store_true",
                    help="validate the config and exit without sampling")

    pt = sub.add_parser("test", help="test H0: zero cross-loadings")
    pt.add_argument("--input", required=True, nargs="+",
                    help="one two-column increment CSV, or two binary path dumps")
    pt.add_argument("--hurst", type=float, required=True)
    pt.add_argument("--level", type=float, default=0.05)
    pt.add_argument("--scale-form", choices=("sqrt", "series"), default="sqrt",
                    help="normalization of the calibration constant")
    pt.add_argument("--blocks", type=int, default=None,
                    help="block count for the variance plug-in")

    pc = sub.add_parser("constants", help="print constant tables")
    pc.add_argument("--hurst", type=float, required=True)
    pc.add_argument("--radius", type=int, default=8,
                    help="autocovariance lags to print")
    pc.add_argument("--n", type=int, nargs="*", default=[64, 256, 1024, 4096])
    pc.add_argument("--alpha", type=float, default=None)
    pc.add_argument("--gamma", type=float, default=None)
    return p


def _cmd_simulate(args) -> int:
    try:
        hp = HurstParams(args.hurst)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.n < 2:
        print(f"error: need at least 2 grid intervals, got {args.n}", file=sys.stderr)
        return 2
    outdir = args.out or _default_outdir()
    manifest = RunManifest(command="simulate", config_digest="-",
                           master_seed=args.seed, version=__version__,
                           extra={"H": hp.H, "n": args.n, "T": args.horizon,
                                  "components": args.components,
                                  "format": args.format})
    manifest.write(outdir)
    if args.components == 2:
        paths = generate_bivariate_fbm(hp, args.n, args.horizon, args.seed)
    else:
        paths = (generate_fbm_path(hp, args.n, args.horizon, args.seed),)
    outputs = []
    for path in paths:
        stem = os.path.join(outdir, f"fbm_c{path.meta.component}")
        if args.format in ("csv", "both"):
            write_path_csv(path, stem + ".csv")
            outputs.append(stem + ".csv")
        if args.format in ("bin", "both"):
            write_path_binary(path, stem + ".bin")
            outputs.append(stem + ".bin")
        if path.meta.generator != "circulant":
            print(f"note: component {path.meta.component} used fallback "
                  f"generator {path.meta.generator}", file=sys.stderr)
    manifest.finalize(outdir, outputs)
    for o in outputs:
        print(o)
    return 0


def _cmd_experiment(args) -> int:
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    digest = config_digest(cfg)
    if args.dry_run:
        print(json.dumps({"valid": True, "experiment": cfg.experiment,
                          "config_digest": digest}))
        return 0
    outdir = args.out or _default_outdir()
    manifest = RunManifest(command="experiment", config_digest=digest,
                           master_seed=cfg.master_seed, version=__version__,
                           extra={"config_file": os.path.abspath(args.config),
                                  "workers": args.workers})
    manifest.write(outdir)
    try:
        report, rows = run_experiment(cfg, workers=max(1, args.workers))
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report_path = os.path.join(outdir, "report.json")
    csv_path = os.path.join(outdir, "replicates.csv")
    write_report_json(report.to_json_dict(), report_path)
    write_replicates_csv(rows, csv_path)
    outputs = [report_path, csv_path]
    if not args.no_figures:
        from .figures import render_figures
        outputs += render_figures(report.to_json_dict(), rows, outdir)
    manifest.finalize(outdir, outputs)
    for c in report.criteria:
        mark = "PASS" if c.passed else "FAIL"
        print(f"[{mark}] {c.name}: observed={c.observed:.6g} "
              f"tolerance={c.tolerance:g} {c.detail}")
    print(f"report: {report_path}")
    return 0 if report.passed else 1


def _paths_from_test_input(inputs, hurst: float):
    if len(inputs) == 1:
        d1, d2 = read_increment_csv(inputs[0])
        if d1.size != d2.size or d1.size < 2:
            raise ValueError("increment columns must have equal length >= 2")
        n = d1.size
        grid = uniform_grid(n, 1.0)
        meta = PathMeta(H=hurst, seed=None, generator="imported-increments")
        x1 = SamplePath(grid, np.concatenate([[0.0], np.cumsum(d1)]), meta)
        x2 = SamplePath(grid, np.concatenate([[0.0], np.cumsum(d2)]), meta)
        return x1, x2, n
    if len(inputs) == 2:
        x1 = read_path_binary(inputs[0])
        x2 = read_path_binary(inputs[1])
        if x1.n_intervals != x2.n_intervals or abs(x1.T - x2.T) > 1e-12:
            raise ValueError("the two binary dumps live on different grids")
        return x1, x2, x1.n_intervals
    raise ValueError("pass one increment CSV or exactly two binary dumps")


def _cmd_test(args) -> int:
    try:
        x1, x2, n = _paths_from_test_input(args.input, args.hurst)
        result = test_zero_cross(x1, x2, n, args.hurst, level=args.level,
                                 L=args.blocks, scale_form=args.scale_form)
    except UnsupportedRegimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if result.degenerate:
        decision = "abstain"
    else:
        decision = "reject" if result.reject else "accept"
    verdict = {
        "decision": decision,
        "statistic": result.statistic,
        "critical_value": result.critical_value,
        "level": result.level,
        "H": result.H,
        "regime": result.regime,
        "variance_estimate": result.variance_estimate,
        "scale": result.scale,
        "scale_form": result.scale_form,
        "n": n,
    }
    print(json.dumps(verdict, sort_keys=True))
    return 0


def _cmd_constants(args) -> int:
    try:
        hp = HurstParams(args.hurst)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"H = {hp.H}  regime = {hp.regime}")
    print("\nautocovariance rho(r):")
    for r in range(args.radius + 1):
        print(f"  rho({r}) = {fgn_autocovariance(hp, r):.10f}")
    if hp.H > 0.5:
        print("\nrate a_n:")
        for n in args.n:
            print(f"  a_{n} = {rate_a_n(hp, n):.6f}")
        if hp.H <= 0.75:
            print("\nsecond-order constant:")
            for form in ("series", "sqrt"):
                c = c_constant(hp, form=form)
                print(f"  {form:>6}-form {c.kind} = {c.value:.10f}")
        else:
            print("\nsecond-order constant: undefined (Rosenblatt regime)")
    else:
        print("\nrate/constant tables need H > 1/2")
    if args.alpha is not None and args.gamma is not None:
        try:
            c = young_constant(args.alpha, args.gamma)
            print(f"\nsewing constant C({args.alpha},{args.gamma}) = {c:.10f}")
        except ValueError as exc:
            print(f"\nsewing constant: {exc}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "simulate":
        return _cmd_simulate(args)
    if args.command == "experiment":
        return _cmd_experiment(args)
    if args.command == "test":
        return _cmd_test(args)
    if args.command == "constants":
        return _cmd_constants(args)
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    raise SystemExit(main())
