"""Command line front end: ``srrr {fit,simulate,rates,check}``.

Exit status is 0 on success, 2 on argument errors and 1 on runtime errors;
errors are printed as one line ``error: <category>: <detail>``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .adaptive import AdaptiveConfig, fit_adaptive, fit_pilot, tune_bic, tune_pilot_bic
from .diagnostics import check_conditions
from .exceptions import ArgumentError, DegenerateColumnError, SrrrError
from .io import check_writable, load_run_config, read_matrix_csv, write_matrix_csv
from .rrr import check_xy, fit_rrr
from .sim import NOISE_KINDS, default_threads, run_rate_experiment
from .solver import SolverOptions


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ArgumentError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="srrr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = sub.add_parser("fit", help="fit a coefficient matrix from X.csv and Y.csv")
    fit.add_argument("x", help="design matrix CSV (n rows, p columns, no header)")
    fit.add_argument("y", help="response matrix CSV (n rows, q columns, no header)")
    fit.add_argument("--rank", type=int, required=True)
    fit.add_argument("--penalty", choices=("none", "lasso", "adaptive"), default="adaptive")
    fit.add_argument("--lambda-lasso", type=float)
    fit.add_argument("--lambda-adap", type=float)
    fit.add_argument("--beta", type=float, default=1.0)
    fit.add_argument("--ridge", type=float, default=0.0,
                     help="ridge for --penalty none (needed when p >= n)")
    fit.add_argument("--standardize", action="store_true",
                     help="center X and Y and scale X columns to unit variance")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--n-starts", type=int, default=5)
    fit.add_argument("--out-coef", default="coef.csv")
    fit.add_argument("--out-summary", default="fit_summary.json")

    for name, text in (("simulate", "Monte Carlo run at one sample size"),
                       ("rates", "Monte Carlo run over the config's n_grid")):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("config", help="key = value run-config file")
        cmd.add_argument("--out-csv")
        cmd.add_argument("--out-summary")
        cmd.add_argument("--threads", type=int, default=None,
                         help="worker processes (default: all CPUs)")

    check = sub.add_parser("check", help="regularity-condition diagnostics for X.csv")
    check.add_argument("x")
    check.add_argument("--s", type=int, default=1, help="number of relevant predictors")
    check.add_argument("--q", type=int, default=1, help="columns of simulated noise")
    check.add_argument("--noise-sd", type=float, default=1.0)
    check.add_argument("--noise-kind", choices=NOISE_KINDS, default="gaussian")
    check.add_argument("--re-samples", type=int, default=1000)
    check.add_argument("--cone-constant", type=float, default=2.0)
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--out", help="report path (default: stdout)")
    return parser


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False)
        fh.write("\n")


def _standardize(x, y):
    x_mean, y_mean = x.mean(axis=0), y.mean(axis=0)
    x_sd = x.std(axis=0)
    zero = np.flatnonzero(x_sd == 0)
    if zero.size:
        raise DegenerateColumnError(f"constant predictor columns {zero.tolist()}")
    return (x - x_mean) / x_sd, y - y_mean, x_mean, x_sd, y_mean


def _fit_summary(kind, fit):
    return {
        f"{kind}_active_set": list(fit.active_set),
        f"{kind}_objective": fit.objective,
        f"{kind}_converged": fit.converged,
        f"{kind}_iterations": fit.iterations,
    }


def cmd_fit(args) -> int:
    for path in (args.out_coef, args.out_summary):
        check_writable(path)
    x, y = check_xy(read_matrix_csv(args.x), read_matrix_csv(args.y))
    n, p = x.shape
    summary = {"penalty": args.penalty, "rank": args.rank, "n": n, "p": p,
               "q": y.shape[1], "standardized": args.standardize, "seed": args.seed}
    if args.standardize:
        x_fit, y_fit, x_mean, x_sd, y_mean = _standardize(x, y)
    else:
        x_fit, y_fit = x, y
    opts = SolverOptions(seed=args.seed, n_starts=args.n_starts)

    if args.penalty == "none":
        rrr = fit_rrr(x_fit, y_fit, args.rank, args.ridge)
        coef = rrr.coefficient
        summary["ridge"] = rrr.ridge_used
    elif args.penalty == "lasso":
        if args.lambda_lasso is None:
            lam, fit, records = tune_pilot_bic(x_fit, y_fit, args.rank, opts=opts)
            summary["tuning"] = records
        else:
            lam, fit = args.lambda_lasso, fit_pilot(x_fit, y_fit, args.rank, args.lambda_lasso, opts)
        coef = fit.coef
        summary["lambda_lasso"] = lam
        summary.update(_fit_summary("fit", fit))
    else:
        if args.lambda_lasso is not None and args.lambda_adap is not None:
            result = fit_adaptive(
                x_fit, y_fit, args.rank,
                AdaptiveConfig(args.lambda_lasso, args.lambda_adap, args.beta), opts,
            )
        else:
            _, details = tune_bic(
                x_fit, y_fit, args.rank,
                None if args.lambda_lasso is None else [args.lambda_lasso],
                None if args.lambda_adap is None else [args.lambda_adap],
                args.beta, opts, return_details=True,
            )
            result = details.result
            summary["tuning"] = details.pilot_records + details.adap_records
        coef = result.coef
        summary.update(lambda_lasso=result.config.lambda_lasso,
                       lambda_adap=result.config.lambda_adap, beta=result.config.beta)
        summary.update(_fit_summary("pilot", result.pilot))
        summary.update(_fit_summary("final", result.final))

    if args.standardize:
        coef = coef / x_sd[:, None]
        summary["intercept"] = (y_mean - x_mean @ coef).tolist()
    summary["active_set"] = [int(j) for j in np.flatnonzero(np.any(coef != 0, axis=1))]
    write_matrix_csv(args.out_coef, coef)
    _write_json(args.out_summary, summary)
    return 0


def cmd_simulate(args, with_grid: bool) -> int:
    config = load_run_config(args.config, os.environ.get("SRRR_SEED"))
    if with_grid and not config.n_grid:
        raise ArgumentError("rates needs an n_grid entry in the config")
    if not with_grid and config.n_grid:
        raise ArgumentError("simulate runs a single n; use the rates subcommand for n_grid")
    out_csv = args.out_csv or config.out_csv or "rates.csv"
    out_summary = args.out_summary or config.out_summary or "summary.json"
    for path in (out_csv, out_summary):
        check_writable(path)
    threads = args.threads if args.threads is not None else default_threads()
    if threads < 1:
        raise ArgumentError("--threads must be at least 1")

    def log(msg):
        print(msg, file=sys.stderr)

    table = run_rate_experiment(
        config.sim_config(), config.n_grid, config.estimator, config.tuning(),
        config.solver_options(), threads=threads, timing=config.timing, log=log,
    )
    table.to_csv(out_csv)
    summary = table.summary()
    summary["config"] = {k: v for k, v in vars(config).items()
                         if k not in ("out_csv", "out_summary")}
    _write_json(out_summary, summary)
    return 0


def cmd_check(args) -> int:
    if args.out:
        check_writable(args.out)
    x = read_matrix_csv(args.x)
    report = check_conditions(
        x, s=args.s, q=args.q, noise_sd=args.noise_sd, noise_kind=args.noise_kind,
        re_samples=args.re_samples, seed=args.seed, cone_constant=args.cone_constant,
    )
    text = json.dumps(report.to_dict(), indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def run_command(argv=None) -> int:
    """Parse ``argv`` and run one subcommand; returns the exit status."""
    try:
        args = _build_parser().parse_args(argv)
        if args.command == "fit":
            return cmd_fit(args)
        if args.command in ("simulate", "rates"):
            return cmd_simulate(args, with_grid=args.command == "rates")
        return cmd_check(args)
    except SrrrError as exc:
        _report(exc.category, exc)
        return 2 if isinstance(exc, ArgumentError) else 1
    except OSError as exc:
        _report("io", exc)
        return 1


def _report(category, exc) -> None:
    detail = " ".join(str(exc).split())
    print(f"error: {category}: {detail}", file=sys.stderr)


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
