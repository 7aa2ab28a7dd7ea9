"""Command-line front end.

Every subcommand writes to ``--out`` (stdout when omitted) in ``--format``
csv or json. Errors are reported on one stderr line of the form
``error[<kind>]: <message>`` with exit codes 2 (validation), 3 (numerical)
and 4 (I/O).
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import io as mio
from .binary_core import JointBinaryParams
from .binary_estimate import EstimateOptions, full_estimate
from .binary_sim import PRESETS, Scenario, diagnostics, run_scenario
from .exceptions import ConvergenceError, DomainError
from .gauss_corr import (
    SETTINGS,
    analytic_rho_x,
    estimate_hier,
    rho_relation_experiment,
    rho_x,
    simulate_formula_based,
    simulate_two_step,
)

WORKERS_ENV = "MARGJOINT_WORKERS"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


class UsageError(DomainError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse prints multi-line usage on error; keep the one-line contract instead
    def error(self, message):
        raise UsageError(message)


def _workers(args) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is not None and raw.strip():
        try:
            value = int(raw)
        except ValueError:
            raise UsageError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    else:
        value = args.workers
    if value < 1:
        raise UsageError(f"workers must be >= 1, got {value}")
    return value


def _emit(args, csv_text, json_obj):
    text = csv_text() if args.format == "csv" else mio.json_text(json_obj())
    mio.write_text(text, args.out)


def _cmd_estimate_binary(args):
    data = mio.load_real_data().data if args.input is None else mio.parse_binary_csv(args.input)
    opts = EstimateOptions(alpha=args.alpha, grid_points=args.grid_points)
    report = full_estimate(data, opts)
    _emit(
        args,
        lambda: mio.report_csv_text(report, args.legacy_999),
        lambda: mio.report_to_dict(report, args.legacy_999, k=data.k),
    )


def _scenario(args) -> Scenario:
    truth, (n_min, n_max) = PRESETS[args.preset]
    if any(v is not None for v in (args.p1, args.p2, args.p11)):
        if any(v is None for v in (args.p1, args.p2, args.p11)):
            raise UsageError("--p1, --p2 and --p11 must be given together")
        truth = JointBinaryParams(args.p1, args.p2, args.p11)
    return Scenario(
        k=args.k,
        n_min=args.n_min if args.n_min is not None else n_min,
        n_max=args.n_max if args.n_max is not None else n_max,
        truth=truth,
        reps=args.reps,
        seed=args.seed,
        extreme_inflate=args.extreme_inflate,
    )


def _cmd_simulate_binary(args):
    sc = _scenario(args)
    result = run_scenario(sc, EstimateOptions(alpha=args.alpha), workers=_workers(args))
    _emit(
        args,
        lambda: mio.scenario_csv_text(result, args.legacy_999),
        lambda: mio.scenario_to_dict(result, args.legacy_999),
    )
    if args.diagnostics:
        bundle = diagnostics(result, bins=args.bins)
        text = (
            mio.diagnostics_csv_text(bundle)
            if args.format == "csv"
            else mio.json_text(mio.diagnostics_to_dict(bundle))
        )
        mio.write_text(text, args.diagnostics)


def _cmd_estimate_corr(args):
    studies = mio.parse_continuous_csv(args.input)
    est = estimate_hier(studies)
    rho = est.rho_star if args.rho is None else args.rho
    res = rho_x(est, [s.n for s in studies], rho)
    quantities = [
        ("theta1", est.theta1),
        ("theta2", est.theta2),
        ("psi1", est.psi1),
        ("psi2", est.psi2),
        ("rho_star", est.rho_star),
        ("rho", rho),
        ("rho_x", res.rho_x),
        ("var1", res.var1),
        ("var2", res.var2),
        ("cov", res.cov),
        ("a", res.a),
        ("A", res.A),
    ]
    _emit(
        args,
        lambda: mio.table_csv_text(("quantity", "value"), quantities),
        lambda: {"schema": mio.SCHEMA_VERSION, "kind": "correlation-estimate", "J": len(studies), **dict(quantities)},
    )


def _cmd_simulate_corr(args):
    base = SETTINGS[args.setting]
    overrides = {"reps": args.reps, "seed": args.seed}
    if args.J is not None:
        overrides["J"] = args.J
    if args.group_size is not None:
        overrides["group_size"] = args.group_size
    settings = type(base)(**{**base.__dict__, **overrides})
    sim = simulate_formula_based if args.method == "formula" else simulate_two_step
    values = sim(settings, workers=_workers(args))
    ok = values[np.isfinite(values)]

    def summary():
        return {
            "schema": mio.SCHEMA_VERSION,
            "kind": "correlation-simulation",
            "method": args.method,
            "setting": args.setting,
            "settings": dict(settings.__dict__),
            "analytic_rho_x": analytic_rho_x(settings),
            "failed_count": int(values.size - ok.size),
            "mean": float(ok.mean()) if ok.size else math.nan,
            "median": float(np.median(ok)) if ok.size else math.nan,
            "sd": float(ok.std(ddof=1)) if ok.size > 1 else math.nan,
            "values": [float(v) for v in values],
        }

    _emit(args, lambda: mio.table_csv_text(("rep", "rho_x"), enumerate(values)), summary)


def _cmd_relation(args):
    sizes = [args.group_size] * args.groups
    phis = [(args.sd1, args.sd2)] * args.groups
    rows = []
    for rho_gen in args.rho_gen:
        rows.extend(rho_relation_experiment((args.mu1, args.mu2), phis, rho_gen, sizes, args.repeats, args.seed))
    columns = ("repeat", "group", "rho_gen", "rho_hat")
    _emit(
        args,
        lambda: mio.table_csv_text(columns, rows),
        lambda: {
            "schema": mio.SCHEMA_VERSION,
            "kind": "relation",
            "points": [dict(zip(columns, r)) for r in rows],
        },
    )


def _cmd_fixture(args):
    fx = mio.load_real_data()

    def as_json():
        return {
            "schema": mio.SCHEMA_VERSION,
            "kind": "fixture",
            "sum_n": fx.data.sum_n,
            "studies": [
                {"study_id": sid, "study": name, "region": region, "n": r.n, "x": r.x, "y": r.y}
                for sid, name, region, r in zip(fx.study_ids, fx.studies, fx.regions, fx.data)
            ],
        }

    _emit(args, lambda: mio.binary_csv_text(fx.data), as_json)


def _probability(text):
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="margjoint", description="Joint-distribution estimates from marginal summary data.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, workers=False):
        sp.add_argument("--out", default=None, help="output path (default: stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="json")
        sp.add_argument("--seed", type=int, default=0)
        if workers:
            sp.add_argument("--workers", type=int, default=1, help=f"process count; {WORKERS_ENV} overrides")

    sp = sub.add_parser("estimate-binary", help="MLE of p11 with SEs and intervals")
    sp.add_argument("input", nargs="?", default=None, help="CSV with header n,x,y (default: bundled fixture)")
    sp.add_argument("--alpha", type=_probability, default=0.05)
    sp.add_argument("--grid-points", type=int, default=101)
    sp.add_argument("--legacy-999", action="store_true", help="write unavailable SEs as 999")
    common(sp)
    sp.set_defaults(func=_cmd_estimate_binary)

    sp = sub.add_parser("simulate-binary", help="Monte-Carlo coverage study for p11")
    sp.add_argument("--preset", choices=sorted(PRESETS), default="weak-small")
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--n-min", type=int, default=None)
    sp.add_argument("--n-max", type=int, default=None)
    sp.add_argument("--p1", type=_probability, default=None)
    sp.add_argument("--p2", type=_probability, default=None)
    sp.add_argument("--p11", type=_probability, default=None)
    sp.add_argument("--reps", type=int, default=1000)
    sp.add_argument("--alpha", type=_probability, default=0.05)
    sp.add_argument("--extreme-inflate", type=int, default=None)
    sp.add_argument("--legacy-999", action="store_true")
    sp.add_argument("--diagnostics", default=None, help="also write histogram/QQ data to this path")
    sp.add_argument("--bins", type=int, default=30)
    common(sp, workers=True)
    sp.set_defaults(func=_cmd_simulate_binary)

    sp = sub.add_parser("estimate-corr", help="pooled correlation from study means and variances")
    sp.add_argument("input", help="CSV with header n,m1,m2,s1,s2 (s are variances)")
    sp.add_argument("--rho", type=float, default=None, help="within-study correlation (default: estimated rho_star)")
    common(sp)
    sp.set_defaults(func=_cmd_estimate_corr)

    sp = sub.add_parser("simulate-corr", help="pooled-correlation simulation")
    sp.add_argument("--setting", type=int, choices=sorted(SETTINGS), default=1)
    sp.add_argument("--method", choices=("formula", "two-step"), default="formula")
    sp.add_argument("--reps", type=int, default=600)
    sp.add_argument("--J", type=int, default=None)
    sp.add_argument("--group-size", type=int, default=None)
    common(sp, workers=True)
    sp.set_defaults(func=_cmd_simulate_corr)

    sp = sub.add_parser("relation", help="sample correlations at given generating correlations")
    sp.add_argument("--rho-gen", type=float, nargs="+", default=[0.25, 0.45, 0.65, 0.85])
    sp.add_argument("--groups", type=int, default=10)
    sp.add_argument("--group-size", type=int, default=50)
    sp.add_argument("--mu1", type=float, default=175.0)
    sp.add_argument("--mu2", type=float, default=75.0)
    sp.add_argument("--sd1", type=float, default=7.0)
    sp.add_argument("--sd2", type=float, default=4.0)
    sp.add_argument("--repeats", type=int, default=4)
    common(sp)
    sp.set_defaults(func=_cmd_relation)

    sp = sub.add_parser("fixture", help="print the bundled twelve-study data")
    common(sp)
    sp.set_defaults(func=_cmd_fixture)
    return p


def _fail(kind: str, message: str, code: int) -> int:
    message = " ".join(str(message).split())
    print(f"error[{kind}]: {message}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except ConvergenceError as exc:
        return _fail("numerical", exc, EXIT_NUMERICAL)
    except FloatingPointError as exc:
        return _fail("numerical", exc, EXIT_NUMERICAL)
    except UsageError as exc:
        return _fail("usage", exc, EXIT_VALIDATION)
    except (DomainError, ValueError) as exc:
        return _fail("validation", exc, EXIT_VALIDATION)
    except OSError as exc:
        where = f"{exc.filename}: " if getattr(exc, "filename", None) else ""
        return _fail("io", f"{where}{exc.strerror or exc}", EXIT_IO)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
