"""
Command-line front end.

    nivtest test exogeneity --input data.csv --y y --z z --w w --k 4 --tau pow2
    nivtest mc table2 --n 250 --reps 500 --seed 7
    nivtest quantile --lambdas 1,0.5 --alpha 0.05

Exit status is 0 whenever the computation finished (whether or not H0 was
rejected), 2 on input errors and 3 on numerical failures.
"""

import argparse
import csv
import json
import logging
import sys

import numpy as np

from . import __version__
from .basis import BasisFamily, design_matrix
from .errors import InputError, NivTestError, NumericalError
from .estimators import Sample
from .montecarlo import Experiment, run_table
from .nulldist import mixture_quantile
from .teststats import (
    default_config,
    test_exogeneity,
    test_nonparametric,
    test_parametric,
    test_simple,
)

log = logging.getLogger("nivtest")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class CliInputError(InputError):
    pass


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise CliInputError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def read_columns(path, names):
    """Read the named numeric columns of a headed CSV file."""
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise CliInputError(f"cannot open {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CliInputError(f"{path}: empty file") from None
        missing = [c for c in names if c not in header]
        if missing:
            raise CliInputError(f"MissingColumn: {', '.join(missing)} not in header {header}")
        idx = [header.index(c) for c in names]
        cols = [[] for _ in names]
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise CliInputError(
                    f"{path}: row {lineno} has {len(row)} fields, header has {len(header)}"
                )
            for col, i, name in zip(cols, idx, names):
                try:
                    col.append(float(row[i]))
                except ValueError:
                    raise CliInputError(
                        f"NonNumericCell: row {lineno}, column {name!r}: {row[i]!r}"
                    ) from None
    return [np.asarray(c) for c in cols]


def ecdf_transform(x):
    """Map values to rank / (n + 1) in (0, 1); ties share their average rank."""
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(x.size)
    ranks[order] = np.arange(1, x.size + 1)
    _, inverse = np.unique(x, return_inverse=True)
    sums = np.bincount(inverse, weights=ranks)
    counts = np.bincount(inverse)
    return (sums / counts)[inverse] / (x.size + 1)


def _check_domain(name, x):
    if x.size and (x.min() < 0.0 or x.max() > 1.0):
        raise CliInputError(
            f"DomainViolation: column {name!r} has values outside [0, 1]; use --transform-w"
        )


def _null_function(args):
    if args.null_poly is not None:
        coef = np.asarray(_float_list(args.null_poly))
        return lambda z: np.polynomial.polynomial.polyval(z, coef)
    if args.null_series is not None:
        coef = np.asarray(_float_list(args.null_series))
        return lambda z: design_matrix(BasisFamily.LEGENDRE, z, coef.size) @ coef
    raise CliInputError("test simple needs --null-poly or --null-series")


def build_config(args, n):
    cfg = default_config(args.test, args.tau, n)
    changes = {
        key: getattr(args, key)
        for key in ("m", "k", "M", "alpha", "path", "degree", "n_instruments")
        if getattr(args, key) is not None
    }
    # a single truncation flag sets both levels
    if args.m is not None and args.M is None:
        changes["M"] = args.m
    if args.M is not None and args.m is None:
        changes["m"] = args.M
    if args.f_family:
        changes["f_family"] = args.f_family
    if args.e_family:
        changes["e_family"] = args.e_family
    return cfg.with_(**changes)


def result_tsv(result):
    record = result.to_dict()
    flat = {k: record[k] for k in ("statistic", "path", "critical_value", "p_value", "reject")}
    for key, value in record["diagnostics"].items():
        if isinstance(value, list):
            value = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        flat[key] = value
    cells = [repr(v) if isinstance(v, float) else str(v) for v in flat.values()]
    return "\t".join(flat) + "\n" + "\t".join(cells) + "\n"


def cmd_test(args, out):
    names = [args.y, args.z, args.w]
    if args.z_restricted:
        names.append(args.z_restricted)
    cols = read_columns(args.input, names)
    y, z, w = cols[:3]
    extra = cols[3] if args.z_restricted else None
    if args.transform_w:
        z, w = ecdf_transform(z), ecdf_transform(w)
        extra = ecdf_transform(extra) if extra is not None else None
    for name, values in ((args.z, z), (args.w, w)):
        _check_domain(name, values)
    sample = Sample(y, z, w)
    cfg = build_config(args, sample.n)
    if args.test == "simple":
        result = test_simple(sample, _null_function(args), cfg)
    elif args.test == "parametric":
        result = test_parametric(sample, cfg)
    elif args.test == "exogeneity":
        result = test_exogeneity(sample, cfg)
    else:
        if extra is not None:
            _check_domain(args.z_restricted, extra)
        result = test_nonparametric(sample, cfg, z_restricted=extra)
    if args.format == "json":
        out.write(json.dumps(result.to_dict(), indent=2) + "\n")
    else:
        out.write(result_tsv(result))
    return EXIT_OK


def cmd_mc(args, out):
    try:
        Experiment(args.table)
    except ValueError:
        raise CliInputError(f"UnknownTable: {args.table!r}") from None
    n = args.n or (250 if args.table in ("table1", "table2") else 500)
    table = run_table(
        args.table, n, args.reps, base_seed=args.seed, workers=args.threads,
        variants=args.variant, statistics=args.statistic, alpha=args.alpha,
    )
    if args.format == "json":
        out.write(json.dumps(table.to_json_obj(), indent=2) + "\n")
    else:
        out.write(table.to_tsv())
    return EXIT_OK


def cmd_quantile(args, out):
    lambdas = _float_list(args.lambdas)
    if not lambdas:
        raise CliInputError("--lambdas is empty")
    out.write(f"{mixture_quantile(lambdas, args.alpha)!r}\n")
    return EXIT_OK


def _add_config_flags(p):
    p.add_argument("--m", type=int, help="cosine terms in the statistic")
    p.add_argument("--k", type=int, help="sieve terms of the null estimator")
    p.add_argument("--M", type=int, help="terms of the mixture covariance")
    p.add_argument("--tau", default="pow2", help="identity, pow1, pow2 or powQ (default pow2)")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--path", choices=["auto", "normal", "mixture"])
    p.add_argument("--degree", type=int, help="polynomial degree (parametric)")
    p.add_argument("--n-instruments", type=int, dest="n_instruments")
    p.add_argument("--f-family", choices=["cosine", "legendre"])
    p.add_argument("--e-family", choices=["cosine", "legendre"])


def build_parser():
    parser = argparse.ArgumentParser(prog="nivtest", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="run a test on CSV data")
    p.add_argument("test", choices=["simple", "parametric", "exogeneity", "nonparametric"])
    p.add_argument("--input", required=True)
    p.add_argument("--y", default="y")
    p.add_argument("--z", default="z")
    p.add_argument("--w", default="w")
    p.add_argument("--z-restricted", dest="z_restricted",
                   help="column used as the restricted regressor (nonparametric)")
    p.add_argument("--transform-w", "--transform", action="store_true", dest="transform_w",
                   help="rescale Z and W by their empirical CDF into (0, 1)")
    p.add_argument("--null-poly", help="phi0 polynomial coefficients c0,c1,...")
    p.add_argument("--null-series", help="phi0 shifted-Legendre coefficients b1,b2,...")
    p.add_argument("--format", choices=["json", "tsv"], default="json")
    _add_config_flags(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("mc", help="rerun a Monte Carlo table")
    p.add_argument("table")
    p.add_argument("--n", type=int)
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--variant", action="append", help="row filter, repeatable")
    p.add_argument("--statistic", action="append", help="statistic filter, repeatable")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default NIVTEST_THREADS, 0 = auto)")
    p.add_argument("--format", choices=["json", "tsv"], default="tsv")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("quantile", help="upper quantile of a chi-square mixture")
    p.add_argument("--lambdas", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_quantile)
    return parser


def _error_name(exc):
    return type(exc).__name__.removesuffix("Error")


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out)
    except NumericalError as exc:
        print(f"nivtest: numerical failure: {_error_name(exc)}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, NivTestError, ValueError) as exc:
        print(f"nivtest: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
