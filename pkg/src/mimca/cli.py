"""Command-line interface: ``mimca {impute,pool,cv,simulate,describe}``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

from . import __version__
from .data import read_table, read_tables
from .errors import DataError, MimcaError, NumericalError
from .glm import ModelFormula, coefficient_names, fit_formula
from .mca import (loglinear_saturated_param_count, loglinear_twoway_param_count,
                  mca_param_count, normal_param_count)
from .multiple import mimca, write_imputation_set
from .pooling import pool_fits
from .select import cross_validate_dims
from .simulation import load_config, run_simulation

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
SEED_ENV = "MIMCA_SEED"

log = logging.getLogger("mimca")


class UsageError(Exception):
    pass


def _default_seed() -> int:
    return int(os.environ.get(SEED_ENV, "0"))


def _delimiter(s: str) -> str:
    return "\t" if s in ("\\t", "tab") else s


def _threads(n):
    return n if n else (os.cpu_count() or 1)


def _emit(rows: list[dict], out, delimiter=","):
    writer = csv.DictWriter(out, fieldnames=list(rows[0]), delimiter=delimiter,
                            lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})


def cmd_impute(args) -> int:
    table = read_table(args.input, args.missing_token, _delimiter(args.delimiter))
    J = int(table.n_categories.sum())
    bound = J - table.n_variables
    if not 1 <= args.dims <= bound:
        raise UsageError(f"--dims must be between 1 and J-K = {bound}")
    if table.is_complete():
        print("warning: no missing values", file=sys.stderr)
    iset = mimca(table, args.dims, args.m, args.epsilon, seed=args.seed,
                 max_iterations=args.max_iterations, threads=_threads(args.threads))
    for w in iset.warnings:
        log.warning(w)
    paths = write_imputation_set(iset, args.out, args.missing_token,
                                 _delimiter(args.delimiter))
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_pool(args) -> int:
    if len(args.files) < 2:
        raise UsageError("pool needs at least two imputed files")
    labels = None
    if args.labels_from:
        meta = json.loads(open(args.labels_from, encoding="utf-8").read())
        labels = [v["labels"] for v in meta["variables"]]
    tables = read_tables(args.files, args.missing_token, _delimiter(args.delimiter),
                         labels)
    formula = ModelFormula.parse(args.formula)
    fits = [fit_formula(t, formula) for t in tables]
    names = coefficient_names(tables[0], formula)
    pooled = pool_fits(fits, names, args.level)
    rows = [{"coefficient": p.name, "estimate": p.estimate, "within": p.within_variance,
             "between": p.between_variance, "total": p.total_variance, "df": p.df,
             "ci_low": p.ci_low, "ci_high": p.ci_high, "m": p.m} for p in pooled]
    _emit(rows, sys.stdout)
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            _emit(rows, fh)
    return EXIT_OK


def cmd_cv(args) -> int:
    table = read_table(args.input, args.missing_token, _delimiter(args.delimiter))
    bound = int(table.n_categories.sum()) - table.n_variables
    if args.candidates:
        cands = [int(c) for c in args.candidates.split(",") if c.strip()]
    else:
        cands = list(range(1, min(args.max_dims, bound) + 1))
    if not cands or min(cands) < 1 or max(cands) > bound:
        raise UsageError(f"candidate dimensions must be between 1 and J-K = {bound}")
    res = cross_validate_dims(table, cands, args.repetitions, args.fraction,
                              seed=args.seed, epsilon=args.epsilon,
                              threads=_threads(args.threads))
    rows = [{"dims": s, "error": e} for s, e in res.table()]
    _emit(rows, sys.stdout)
    print(f"best,{res.best}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    report = run_simulation(cfg, threads=_threads(args.threads))
    print(report.format_summary())
    if args.out:
        for p in report.write(args.out):
            print(p)
    return EXIT_OK


def cmd_describe(args) -> int:
    table = read_table(args.input, args.missing_token, _delimiter(args.delimiter))
    I, K = table.n_rows, table.n_variables
    q = table.n_categories
    J = int(q.sum())
    print(f"individuals (I): {I}")
    print(f"variables (K): {K}")
    print(f"categories (J): {J}")
    print("variable,categories,missing_rate")
    miss = table.missing.mean(axis=0)
    for v, rate in zip(table.variables, miss):
        print(f"{v.name},{v.n_categories},{rate:.4f}")
    print(f"overall missing rate: {table.missing.mean():.4f}")
    print(f"complete rows: {int((~table.missing.any(axis=1)).sum())}")
    S = min(args.dims, J - K)
    print("model,parameters")
    print(f"mca(S={S}),{mca_param_count(I, J, K, S)}")
    print(f"normal,{normal_param_count(J, K)}")
    print(f"loglinear_twoway,{loglinear_twoway_param_count(q)}")
    print(f"loglinear_saturated,{loglinear_saturated_param_count(q)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mimca", description="Multiple imputation of categorical data with MCA")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def io(p):
        p.add_argument("--missing-token", default="NA")
        p.add_argument("--delimiter", default=",")

    def seeded(p):
        p.add_argument("--seed", type=int, default=None,
                       help=f"random seed (default ${SEED_ENV} or 0)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: available cores)")

    p = sub.add_parser("impute", help="multiple imputation with MCA")
    p.add_argument("--input", required=True)
    p.add_argument("--dims", type=int, required=True)
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--max-iterations", type=int, default=1000)
    p.add_argument("--out", required=True, help="output prefix")
    io(p)
    seeded(p)
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("pool", help="fit a logistic model per file and pool")
    p.add_argument("files", nargs="+")
    p.add_argument("--formula", required=True,
                   help="e.g. 'chd=Present ~ famhist + tobacco'")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--labels-from", help="metadata sidecar written by impute")
    p.add_argument("--out")
    io(p)
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("cv", help="cross-validate the number of dimensions")
    p.add_argument("--input", required=True)
    p.add_argument("--candidates", help="comma-separated dimensions")
    p.add_argument("--max-dims", type=int, default=5)
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--fraction", type=float, default=0.05)
    p.add_argument("--epsilon", type=float, default=1e-6)
    io(p)
    seeded(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("simulate", help="run a coverage simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="prefix for summary and per-run tables")
    seeded(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("describe", help="profile a table and count parameters")
    p.add_argument("--input", required=True)
    p.add_argument("--dims", type=int, default=2)
    io(p)
    p.set_defaults(func=cmd_describe)
    return parser


def _origin(exc: BaseException) -> str:
    tb = exc.__traceback__
    name = "mimca"
    while tb is not None:
        mod = tb.tb_frame.f_globals.get("__name__", "")
        if mod.startswith("mimca."):
            name = mod
        tb = tb.tb_next
    return name


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if getattr(args, "seed", 0) is None and args.command != "simulate":
        args.seed = _default_seed()
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error [{_origin(exc)}]: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, MimcaError, ValueError) as exc:
        print(f"data error [{_origin(exc)}]: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
