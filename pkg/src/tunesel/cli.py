"""Command-line entry point: ``tunesel <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import select_lambda as sl
from . import select_series as ss
from .basis import FAMILIES, MONOMIAL, BasisSpec
from .dataset import load_table, save_table
from .lasso import SolverConfig, lasso_fit, logit_penalized_fit
from .mc import METHODS, TRUTHS, DgpSpec, McConfig, run_table1, simulate_dataset
from .series import fit_series, pilot_k

SERIES_METHODS = ("mallows", "stein", "lepski", "validation", "vfold", "loo", "aggregation")
LAMBDA_RULES = ("brt", "bcch", "bootstrap", "sure", "cv", "cluster", "panel", "quantile", "glm")


def _auto_float(text):
    return None if text == "auto" else float(text)


def _auto_int(text):
    return None if text == "auto" else int(text)


def _add_data_args(p):
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--y", required=True, help="response column")
    p.add_argument("--x", help="comma-separated covariate columns (default: all others)")
    p.add_argument("--cluster", help="cluster label column")
    p.add_argument("--unit", help="panel unit label column")
    p.add_argument("--time", help="panel time label column")
    p.add_argument("--normalize", action="store_true",
                   help="divide each covariate by its root-mean-square")


def _add_output_args(p):
    p.add_argument("--out", help="report path; .csv gives key,value CSV (default: stdout)")
    p.add_argument("--full-precision", action="store_true",
                   help="write floats with full precision instead of 6 significant digits")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tunesel",
                                     description="Tuning-parameter selection for series and lasso estimators.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-series", help="least-squares series fit with a fixed number of terms")
    _add_data_args(p)
    p.add_argument("--basis", choices=FAMILIES, default=MONOMIAL)
    p.add_argument("--k", type=int, required=True)
    _add_output_args(p)

    p = sub.add_parser("select-k", help="choose the number of series terms")
    _add_data_args(p)
    p.add_argument("--method", choices=SERIES_METHODS, required=True)
    p.add_argument("--basis", choices=FAMILIES, default=MONOMIAL)
    p.add_argument("--kmin", type=int, default=1)
    p.add_argument("--kmax", type=_auto_int, default=None, help="largest candidate or 'auto'")
    p.add_argument("--kbar", type=_auto_int, default=None, help="pilot term count or 'auto'")
    p.add_argument("--x0", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--B", type=int, default=1000)
    p.add_argument("--V", type=int, default=5)
    p.add_argument("--train-frac", type=float, default=2 / 3)
    p.add_argument("--seed", type=int, default=0)
    _add_output_args(p)

    p = sub.add_parser("lasso", help="lasso or penalised logit at a fixed penalty")
    _add_data_args(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--logit", action="store_true")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=10_000)
    _add_output_args(p)

    p = sub.add_parser("select-lambda", help="choose the lasso penalty")
    _add_data_args(p)
    p.add_argument("--rule", choices=LAMBDA_RULES, required=True)
    p.add_argument("--alpha", type=_auto_float, default=None, help="level or 'auto'")
    p.add_argument("--c", type=float, default=sl.DEFAULT_C)
    p.add_argument("--sigma", type=float, help="noise sd (brt)")
    p.add_argument("--sigma2", type=float, help="noise variance (sure; estimated if omitted)")
    p.add_argument("--B", type=int, default=1000)
    p.add_argument("--S", type=int, default=10_000)
    p.add_argument("--V", type=int, default=5)
    p.add_argument("--u", type=float, default=0.5, help="quantile level (quantile rule)")
    p.add_argument("--grid-size", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=10_000)
    _add_output_args(p)

    p = sub.add_parser("simulate", help="Monte Carlo table or a single simulated dataset")
    p.add_argument("--table1", action="store_true", help="run the full method comparison")
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--f", choices=sorted(TRUTHS), help="regression function (dataset mode, or restricts --table1)")
    p.add_argument("--n", type=int, help="sample size (dataset mode, or restricts --table1)")
    p.add_argument("--B", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.add_argument("--full-precision", action="store_true")
    return parser


def _fmt(v, full):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if full else f"{float(v):.6g}"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def write_report(report: dict, out, full: bool) -> None:
    if out and str(out).endswith(".csv"):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in report.items():
            w.writerow([k, _fmt(v, full)])
        text = buf.getvalue()
    else:
        text = "".join(f"{k} = {_fmt(v, full)}\n" for k, v in report.items())
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load(args):
    cols = args.x.split(",") if args.x else None
    return load_table(args.data, y=args.y, x=cols, cluster=args.cluster, unit=args.unit,
                      time=args.time, normalize=args.normalize)


def _cmd_fit_series(args):
    d = _load(args)
    fit = fit_series(d, BasisSpec(args.basis, args.k))
    rep = {"basis": args.basis, "k": args.k, "n": d.n,
           "mse": float(np.mean(fit.residuals ** 2)), "leverage_sum": float(fit.leverage.sum())}
    rep.update({f"beta[{j}]": float(b) for j, b in enumerate(fit.beta)})
    return rep


def _cmd_select_k(args):
    d = _load(args)
    kmax = pilot_k(d.n) if args.kmax is None else args.kmax
    Kn = range(args.kmin, kmax + 1)
    m, fam = args.method, args.basis
    if m in ("mallows", "stein", "aggregation"):
        fn = {"mallows": ss.mallows_select, "stein": ss.stein_select,
              "aggregation": ss.aggregate_predictor}[m]
        res = fn(d, Kn, kbar=args.kbar, family=fam)
    elif m == "lepski":
        res = ss.lepski_select(d, Kn, x0=args.x0, beta=args.beta, alpha=args.alpha, B=args.B,
                               kbar=args.kbar, seed=args.seed, family=fam)
    elif m == "validation":
        res = ss.validation_select(d, Kn, split_seed=args.seed, train_frac=args.train_frac,
                                   family=fam)
    elif m == "vfold":
        res = ss.vfold_select(d, Kn, V=args.V, seed=args.seed, family=fam)
    else:
        res = ss.loo_select(d, Kn, family=fam)
    rep = {"basis": fam, "n": d.n, "kmin": args.kmin, "kmax": kmax, "seed": args.seed}
    rep.update(res.to_report())
    return rep


def _cmd_lasso(args):
    d = _load(args)
    cfg = SolverConfig(args.tol, args.max_iter)
    fit = (logit_penalized_fit if args.logit else lasso_fit)(d, args.lam, cfg)
    rep = {"model": "logit" if args.logit else "lasso", "lambda": fit.lam,
           "objective": fit.objective, "kkt_gap": fit.kkt_gap, "iterations": fit.iterations,
           "active_set": " ".join(str(j) for j in fit.active_set)}
    rep.update({f"beta[{d.col_names[j]}]": float(b) for j, b in enumerate(fit.beta)})
    return rep


def _cmd_select_lambda(args):
    d = _load(args)
    cfg = SolverConfig(args.tol, args.max_iter)
    r, a, c = args.rule, args.alpha, args.c
    grid = sl.default_grid(d.n, args.grid_size)
    if r == "brt":
        if args.sigma is None:
            raise ValueError("--sigma is required for the brt rule")
        res = sl.brt_lambda(d, args.sigma, c=c, alpha=a)
    elif r == "bcch":
        res = sl.bcch_lambda(d, c=c, alpha=a, cfg=cfg)
    elif r == "bootstrap":
        res = sl.bootstrap_lambda(d, c=c, alpha=a, B=args.B, seed=args.seed, cfg=cfg)
    elif r == "sure":
        s2 = args.sigma2 if args.sigma2 is not None else sl.estimate_sigma2(d, cfg)
        res = sl.sure_lambda(d, s2, grid, cfg)
    elif r == "cv":
        res = sl.cv_lambda(d, V=args.V, grid=grid, seed=args.seed, cfg=cfg)
    elif r == "cluster":
        res = sl.cluster_bcch_lambda(d, c=c, alpha=a, cfg=cfg)
    elif r == "panel":
        res = sl.panel_bcch_lambda(d, c=c, alpha=a, cfg=cfg)
    elif r == "quantile":
        res = sl.quantile_pivotal_lambda(d, args.u, c=c, alpha=a, S=args.S, seed=args.seed)
    else:
        res = sl.glm_bootstrap_after_cv_lambda(d, V=args.V, grid=grid, c=c, alpha=a, B=args.B,
                                               seed=args.seed, cfg=cfg)
    rep = {"n": d.n, "p": d.p}
    rep.update(res.to_report())
    return rep


def _cmd_simulate(args):
    out = Path(args.out)
    if not args.table1:
        if args.f is None or args.n is None:
            raise ValueError("dataset mode needs --f and --n (or pass --table1)")
        save_table(simulate_dataset(DgpSpec(args.f, args.n), args.seed), out)
        return None
    cfg = McConfig(reps=args.reps, master_seed=args.seed, jobs=args.jobs, B=args.B,
                   methods=tuple(m for m in args.methods.split(",") if m))
    if args.f and args.n:
        cfg.dgps = (DgpSpec(args.f, args.n),)
    elif args.f or args.n:
        cfg.dgps = tuple(s for s in cfg.dgps
                         if (args.f is None or s.f == args.f) and (args.n is None or s.n == args.n))
        if not cfg.dgps:
            raise ValueError("no design matches the --f/--n filter")
    report = run_table1(cfg)
    out.write_text(report.to_csv(args.full_precision), encoding="utf-8")
    out.with_suffix(".txt").write_text(report.to_text(), encoding="utf-8")
    return None


COMMANDS = {"fit-series": _cmd_fit_series, "select-k": _cmd_select_k, "lasso": _cmd_lasso,
            "select-lambda": _cmd_select_lambda, "simulate": _cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        report = COMMANDS[args.command](args)
        if report is not None:
            write_report(report, args.out, args.full_precision)
    except Exception as exc:  # noqa: BLE001 - every runtime failure maps to exit code 1
        print(f"tunesel {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
