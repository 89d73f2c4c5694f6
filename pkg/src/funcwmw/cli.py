"""Command-line interface.

Subcommands: ``test`` runs the tests on two curve CSV files, ``power`` and
``asymptotic`` run studies from JSON configs, ``subsample`` runs a subsample
rejection study on two CSV files, and ``simulate`` writes generated samples.
Tables are CSV with ``#`` provenance lines; single-test reports are JSON.
Set FUNCWMW_THREADS to run power-study replicates in several processes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import __version__
from ._rng import STREAM_REPLICATE, derive_seed
from .config import (
    ConfigError,
    asymptotic_run,
    bundled_configs,
    config_hash,
    distribution_label,
    load_document,
    power_run,
)
from .csvio import CurveCsvError, load_pair, write_curves
from .fspace import LpGeometry, unit_grid
from .harness import TEST_IDS, TestOptions, power_ratio_table, run_power_study, run_subsample_study
from .meantests import MEAN_TESTS, mean_tests, pooled_spectrum
from .simproc import ShiftSpec, gen_values, sbm, t_process
from .wmw import GAMMA_MODES, wmw_test


class UsageError(Exception):
    pass


def _num(x) -> str:
    if x is None:
        return "NA"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _csv_text(header, rows, provenance: dict) -> str:
    buf = io.StringIO()
    for k, v in provenance.items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_num(v) for v in r])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _json_text(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _options(args) -> TestOptions:
    try:
        return TestOptions(p=args.p, gamma_mode=args.gamma_mode, cumvar_threshold=args.cumvar,
                           L=args.L, n_mc=args.n_mc, trunc_tol=args.trunc_tol)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _tests(names) -> tuple[str, ...]:
    bad = [t for t in names if t not in TEST_IDS]
    if bad:
        raise UsageError(f"unknown test(s) {', '.join(bad)}; choose from {', '.join(TEST_IDS)}")
    return tuple(dict.fromkeys(names))


# -- test -------------------------------------------------------------------

def cmd_test(args) -> int:
    X, Y, info = load_pair(args.x, args.y, args.grid_header, args.weight_mode)
    tests = _tests(args.tests)
    opts = _options(args)
    if opts.p != 2 and "CFF" in tests:
        raise UsageError("CFF is defined for p = 2 only")
    results = {}
    if "WMW" in tests:
        res = wmw_test(X, Y, LpGeometry(opts.p), args.alpha, opts.n_mc, args.seed,
                       opts.gamma_mode, opts.trunc_tol)
        d = res.asdict()
        d.pop("test")
        d["spectrum"] = res.spectral.summary()
        results["WMW"] = d
    mt = [t for t in tests if t in MEAN_TESTS]
    if mt:
        res = mean_tests(X, Y, mt, args.alpha, opts.L, opts.cumvar_threshold, opts.n_mc,
                         args.seed, opts.trunc_tol)
        summary = pooled_spectrum(X, Y, opts.trunc_tol).summary()
        for t in mt:
            d = res[t].asdict()
            d.pop("test")
            d["spectrum"] = summary
            results[t] = d
    report = {
        "version": __version__,
        "seed": args.seed,
        "alpha": args.alpha,
        "n_mc": opts.n_mc,
        "p": opts.p,
        "gamma_mode": opts.gamma_mode,
        "inputs": info,
        "tests": results,
    }
    _emit(_json_text(report), args.out)
    return 0


# -- power ------------------------------------------------------------------

def _provenance(command: str, seed: int, doc: dict) -> dict:
    return {"command": command, "version": __version__, "seed": seed,
            "config_sha256": config_hash(doc)}


def cmd_power(args) -> int:
    doc, _ = load_document(args.config)
    run = power_run(doc)
    prov = _provenance("power", run.seed, doc)
    rows, ratio_rows, summary_rows = [], [], []
    for label, cfg in zip(run.labels, run.studies):
        table = run_power_study(cfg)
        for r in table:
            rows.append((label, r.test, r.shift, r.c, r.rejection_rate, r.mc_stderr,
                         r.replicates, r.rejections))
            summary_rows.append({"distribution": label, "test": r.test, "shift": r.shift,
                                 "c": r.c, "rejection_rate": r.rejection_rate,
                                 "mc_stderr": r.mc_stderr, "replicates": r.replicates})
        if "WMW" in cfg.tests:
            for r in power_ratio_table(table, "WMW"):
                ratio_rows.append((label, r.test, r.shift, r.c, r.ratio, r.rate,
                                   r.baseline_rate))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "power.csv").write_text(_csv_text(
        ("distribution", "test", "shift", "c", "rejection_rate", "mc_stderr", "replicates",
         "rejections"), rows, prov))
    files = {"power": "power.csv"}
    if ratio_rows:
        (out / "ratios.csv").write_text(_csv_text(
            ("distribution", "test", "shift", "c", "ratio_to_WMW", "rate", "WMW_rate"),
            ratio_rows, prov))
        files["ratios"] = "ratios.csv"
    summary = {"provenance": prov, "config": doc, "files": files, "rows": summary_rows}
    (out / "summary.json").write_text(_json_text(summary))
    return 0


# -- asymptotic -------------------------------------------------------------

def cmd_asymptotic(args) -> int:
    from .asympt import DistributionSpec, asymptotic_power_curves

    doc, _ = load_document(args.config)
    run = asymptotic_run(doc)
    rows = []
    for kl in run.distributions:
        dist = DistributionSpec(kl, run.grid, run.mc_outer, run.mc_inner, run.seed)
        try:
            curves = asymptotic_power_curves(
                dist, LpGeometry(run.p), run.shift_kinds, run.c_values, run.tests,
                run.alpha, run.n_mc, run.seed, run.L, run.cumvar_threshold, run.gamma)
        except ValueError as exc:
            raise ConfigError(f"{distribution_label(kl)}: {exc}") from exc
        wmw = {(cv.shift_kind, c): p for cv in curves if cv.test == "WMW"
               for c, p in zip(cv.c_values, cv.powers)}
        for cv in curves:
            for c, p in zip(cv.c_values, cv.powers):
                base = wmw.get((cv.shift_kind, c))
                ratio = p / base if base else None
                rows.append((distribution_label(kl), cv.test, cv.shift_kind, c, p, ratio))
    text = _csv_text(("distribution", "test", "shift", "c", "power", "ratio_to_WMW"), rows,
                     _provenance("asymptotic", run.seed, doc))
    _emit(text, args.out)
    return 0


# -- subsample --------------------------------------------------------------

def cmd_subsample(args) -> int:
    X, Y, info = load_pair(args.x, args.y, args.grid_header, args.weight_mode)
    tests = _tests(args.tests)
    table = run_subsample_study(X, Y, args.fraction, args.repeats, tests, args.alpha,
                                args.seed, _options(args))
    prov = {"command": "subsample", "version": __version__, "seed": args.seed,
            "x": info["x"]["path"], "y": info["y"]["path"]}
    rows = [(r.test, r.c, r.rejection_rate, r.mc_stderr, r.replicates, r.rejections)
            for r in table]
    _emit(_csv_text(("test", "fraction", "rejection_rate", "mc_stderr", "repeats",
                     "rejections"), rows, prov), args.out)
    return 0


# -- simulate ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    kl = sbm(args.K) if args.model == "sbm" else t_process(args.r, args.K, args.t_mode)
    grid = unit_grid(args.d)
    X = gen_values(kl, args.m, grid, derive_seed(args.seed, STREAM_REPLICATE, 0, 0))
    Y = gen_values(kl, args.n, grid, derive_seed(args.seed, STREAM_REPLICATE, 0, 1))
    Y = Y + ShiftSpec(args.shift, args.c).values(grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_curves(out / "x.csv", X, grid.points)
    write_curves(out / "y.csv", Y, grid.points)
    return 0


# -- parser -----------------------------------------------------------------

def _add_test_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("x", help="CSV of the first sample, one curve per row")
    p.add_argument("y", help="CSV of the second sample")
    p.add_argument("--grid-header", action="store_true",
                   help="first row of each file holds grid coordinates")
    p.add_argument("--weight-mode", choices=("euclidean", "trapezoid"), default="euclidean")
    p.add_argument("--tests", nargs="+", default=list(TEST_IDS), metavar="TEST",
                   help=f"tests to run (default: {' '.join(TEST_IDS)})")
    p.add_argument("--p", type=float, default=2.0, help="norm exponent, >= 2")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-mc", type=int, default=100_000, help="calibration draws")
    p.add_argument("--L", type=int, default=None, help="number of components for HKR")
    p.add_argument("--cumvar", type=float, default=0.85,
                   help="cumulative variance threshold choosing L")
    p.add_argument("--gamma-mode", choices=GAMMA_MODES, default="pooled_rank",
                   help="covariance estimator calibrating WMW")
    p.add_argument("--trunc-tol", type=float, default=1e-10)
    p.add_argument("-o", "--out", help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="funcwmw", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"funcwmw {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="run the tests on two CSV samples (JSON report)")
    _add_test_options(p)
    p.set_defaults(func=cmd_test)

    configs = ", ".join(bundled_configs())
    p = sub.add_parser("power", help="finite-sample size and power study")
    p.add_argument("config", help=f"JSON config path or bundled name ({configs})")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("asymptotic", help="local asymptotic power curves (CSV)")
    p.add_argument("config", help=f"JSON config path or bundled name ({configs})")
    p.add_argument("-o", "--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_asymptotic)

    p = sub.add_parser("subsample", help="rejection proportions over random subsamples")
    _add_test_options(p)
    p.add_argument("--fraction", type=float, default=0.2)
    p.add_argument("--repeats", type=int, default=1000)
    p.set_defaults(func=cmd_subsample)

    p = sub.add_parser("simulate", help="write two simulated samples as CSV")
    p.add_argument("--model", choices=("sbm", "t"), default="sbm")
    p.add_argument("--r", type=int, default=5, help="degrees of freedom of the t process")
    p.add_argument("--t-mode", choices=("shared", "independent"), default="shared")
    p.add_argument("--K", type=int, default=500, help="series truncation")
    p.add_argument("--m", type=int, default=15)
    p.add_argument("--n", type=int, default=15)
    p.add_argument("--d", type=int, default=250)
    p.add_argument("--shift", choices=("delta1", "delta2", "delta3"), default="delta1")
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CurveCsvError, UsageError) as exc:
        print(f"funcwmw {args.command}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"funcwmw {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
