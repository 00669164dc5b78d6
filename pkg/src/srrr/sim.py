"""Synthetic data and Monte Carlo rate experiments.

Data follow ``Y = X C0 + E`` with AR(1)-correlated Gaussian predictors, a
row-sparse rank-``r`` ``C0`` whose first ``s`` rows are the relevant ones,
and i.i.d. sub-Gaussian noise.
"""

from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple

import numpy as np
from threadpoolctl import threadpool_limits

from .adaptive import AdaptiveConfig, fit_adaptive, fit_pilot, tune_bic, tune_pilot_bic
from .exceptions import ArgumentError, SrrrError
from .linalg import polar_factor, row_norms
from .rrr import fit_rrr
from .solver import SolverOptions, with_seed

__all__ = [
    "NOISE_KINDS",
    "ESTIMATORS",
    "CSV_HEADER",
    "SimConfig",
    "Dataset",
    "draw_noise",
    "gen_dataset",
    "evaluate_fit",
    "fit_estimator",
    "RateRow",
    "RateTable",
    "run_rate_experiment",
]

NOISE_KINDS = ("gaussian", "scaled-rademacher")
ESTIMATORS = ("rrr", "srrr", "adaptive")
SUPPORT_TOL = 1e-8
CSV_HEADER = (
    "n", "p", "q", "r", "s", "rho", "signal", "noise_sd", "estimator", "replicate",
    "pred_error", "est_error", "tp", "fp", "exact_support", "runtime_seconds",
)


@dataclass(frozen=True)
class SimConfig:
    n: int = 200
    p: int = 50
    q: int = 10
    r: int = 2
    s: int = 5
    rho: float = 0.5
    signal: float = 1.0
    noise_sd: float = 1.0
    noise_kind: str = "gaussian"
    seed: int = 0
    replicates: int = 1

    def __post_init__(self):
        for name in ("n", "p", "q", "r", "s", "replicates"):
            if int(getattr(self, name)) < 1:
                raise ArgumentError(f"{name} must be a positive integer")
        if self.s > self.p:
            raise ArgumentError(f"s={self.s} exceeds p={self.p}")
        if self.r > min(self.s, self.q):
            raise ArgumentError(f"r={self.r} exceeds min(s, q)={min(self.s, self.q)}")
        if not 0 <= self.rho < 1:
            raise ArgumentError(f"rho must lie in [0, 1), got {self.rho}")
        if not (self.signal > 0 and math.isfinite(self.signal)):
            raise ArgumentError("signal must be positive")
        if not (self.noise_sd > 0 and math.isfinite(self.noise_sd)):
            raise ArgumentError("noise_sd must be positive")
        if self.noise_kind not in NOISE_KINDS:
            raise ArgumentError(f"noise_kind must be one of {NOISE_KINDS}")

    @property
    def rate_df(self) -> int:
        """``r (q + s - r)``, the parameter count driving the error rates."""
        return self.r * (self.q + self.s - self.r)


class Dataset(NamedTuple):
    x: np.ndarray
    y: np.ndarray
    c0: np.ndarray
    e: np.ndarray


def draw_noise(rng, shape, sd: float, kind: str = "gaussian") -> np.ndarray:
    if kind == "gaussian":
        return sd * rng.standard_normal(shape)
    if kind == "scaled-rademacher":
        return sd * (2.0 * rng.integers(0, 2, size=shape) - 1.0)
    raise ArgumentError(f"unknown noise kind {kind!r}")


def _ar1_design(rng, n, p, rho):
    z = rng.standard_normal((n, p))
    x = np.empty_like(z)
    x[:, 0] = z[:, 0]
    scale = math.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        x[:, j] = rho * x[:, j - 1] + scale * z[:, j]
    return x


def gen_dataset(config: SimConfig, replicate: int = 0) -> Dataset:
    """Draw one dataset; deterministic in ``(config.seed, replicate)``.

    Relevant rows of ``C0 = B0 A0'`` have norms uniform on
    ``[signal, 2 signal]``; ``A0`` is a random orthonormal frame, so the row
    norms of ``C0`` equal those of ``B0``.
    """
    rng = np.random.default_rng([config.seed, replicate])
    n, p, q, r, s = config.n, config.p, config.q, config.r, config.s
    x = _ar1_design(rng, n, p, config.rho)
    directions = rng.standard_normal((s, r))
    directions /= row_norms(directions)[:, None]
    lengths = rng.uniform(config.signal, 2.0 * config.signal, s)
    b0 = np.zeros((p, r))
    b0[:s] = directions * lengths[:, None]
    a0, _ = polar_factor(rng.standard_normal((q, r)))
    c0 = b0 @ a0.T
    e = draw_noise(rng, (n, q), config.noise_sd, config.noise_kind)
    nonzero = row_norms(c0[:s])
    if nonzero.min() < config.signal * (1 - 1e-12):
        raise ArgumentError("generated coefficient violates the row-norm lower bound")
    return Dataset(x, x @ c0 + e, c0, e)


def evaluate_fit(c_hat, c0, x, s: int) -> dict:
    c_hat = np.asarray(c_hat, dtype=float)
    c0 = np.asarray(c0, dtype=float)
    diff = c_hat - c0
    support = row_norms(c_hat) > SUPPORT_TOL
    tp = int(np.count_nonzero(support[:s]))
    fp = int(np.count_nonzero(support[s:]))
    return {
        "pred_error": float(np.linalg.norm(x @ diff)),
        "est_error": float(np.linalg.norm(diff)),
        "tp": tp,
        "fp": fp,
        "exact_support": tp == s and fp == 0,
    }


def fit_estimator(x, y, r: int, estimator: str, tuning: dict | None = None,
                  opts: SolverOptions | None = None) -> np.ndarray:
    """Fit one of ``rrr``, ``srrr``, ``adaptive`` and return the coefficient.

    ``tuning`` may hold ``lambda_lasso``, ``lambda_adap``, ``beta``,
    ``grid_lasso``, ``grid_adap`` and ``ridge``.  Missing penalties are chosen
    by BIC over the grids (data-driven grids when those are missing too).
    """
    tuning = dict(tuning or {})
    if estimator == "rrr":
        ridge = tuning.get("ridge")
        if ridge is None:
            ridge = 0.0 if x.shape[1] < x.shape[0] else 1e-4
        return fit_rrr(x, y, r, ridge).coefficient
    if estimator == "srrr":
        lam = tuning.get("lambda_lasso")
        if lam is None:
            _, fit, _ = tune_pilot_bic(x, y, r, tuning.get("grid_lasso"), opts)
            return fit.coef
        return fit_pilot(x, y, r, lam, opts).coef
    if estimator == "adaptive":
        beta = tuning.get("beta", 1.0)
        lam_l, lam_a = tuning.get("lambda_lasso"), tuning.get("lambda_adap")
        if lam_l is not None and lam_a is not None:
            return fit_adaptive(x, y, r, AdaptiveConfig(lam_l, lam_a, beta), opts).coef
        _, details = tune_bic(
            x, y, r,
            [lam_l] if lam_l is not None else tuning.get("grid_lasso"),
            [lam_a] if lam_a is not None else tuning.get("grid_adap"),
            beta, opts, return_details=True,
        )
        return details.result.coef
    raise ArgumentError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")


@dataclass
class RateRow:
    n: int
    p: int
    q: int
    r: int
    s: int
    rho: float
    signal: float
    noise_sd: float
    estimator: str
    replicate: int
    pred_error: float
    est_error: float
    tp: int
    fp: int
    exact_support: bool
    runtime_seconds: float
    error: str | None = None

    @property
    def rate_df(self) -> int:
        return self.r * (self.q + self.s - self.r)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _stats(values: np.ndarray) -> dict:
    values = values[~np.isnan(values)]
    if values.size == 0:
        return {"mean": None, "median": None, "sd": None, "count": 0}
    sd = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return {
        "mean": float(np.mean(values)),
        "median": float(np.median(values)),
        "sd": sd,
        "count": int(values.size),
    }


@dataclass
class RateTable:
    rows: list[RateRow] = field(default_factory=list)

    def groups(self) -> dict[tuple, list[RateRow]]:
        out: dict[tuple, list[RateRow]] = {}
        for row in self.rows:
            key = (row.n, row.p, row.q, row.r, row.s, row.rho, row.signal,
                   row.noise_sd, row.estimator)
            out.setdefault(key, []).append(row)
        return out

    def aggregates(self) -> list[dict]:
        """Per-configuration mean, median and sd of each metric.

        Failed replicates are excluded and counted under ``failures``.
        Normalized errors are ``est_error * sqrt(n / df)`` and
        ``pred_error / sqrt(df)`` with ``df = r (q + s - r)``.
        """
        summary = []
        for key, rows in self.groups().items():
            ok = [row for row in rows if row.error is None]
            df = rows[0].rate_df
            n = rows[0].n

            def col(fn):
                return np.array([fn(row) for row in ok], dtype=float)

            entry = dict(zip(("n", "p", "q", "r", "s", "rho", "signal",
                              "noise_sd", "estimator"), key))
            entry["replicates"] = len(rows)
            entry["failures"] = len(rows) - len(ok)
            entry["rate_df"] = df
            entry["metrics"] = {
                "pred_error": _stats(col(lambda t: t.pred_error)),
                "est_error": _stats(col(lambda t: t.est_error)),
                "tp": _stats(col(lambda t: t.tp)),
                "fp": _stats(col(lambda t: t.fp)),
                "exact_support": _stats(col(lambda t: float(t.exact_support))),
                "normalized_est_error": _stats(col(lambda t: t.est_error * math.sqrt(n / df))),
                "normalized_pred_error": _stats(col(lambda t: t.pred_error / math.sqrt(df))),
            }
            summary.append(entry)
        return summary

    def mean(self, metric: str, **where) -> float:
        vals = [getattr(row, metric) for row in self.rows
                if row.error is None and all(getattr(row, k) == v for k, v in where.items())]
        return float(np.mean(np.asarray(vals, dtype=float)))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow([_fmt(getattr(row, name)) for name in CSV_HEADER])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def summary(self) -> dict:
        failures = [{"n": r.n, "replicate": r.replicate, "error": r.error}
                    for r in self.rows if r.error is not None]
        return {"aggregates": self.aggregates(), "failures": failures}

    @classmethod
    def from_csv(cls, text: str) -> "RateTable":
        reader = csv.DictReader(io.StringIO(text))
        rows = []
        for rec in reader:
            rows.append(RateRow(
                n=int(rec["n"]), p=int(rec["p"]), q=int(rec["q"]), r=int(rec["r"]),
                s=int(rec["s"]), rho=float(rec["rho"]), signal=float(rec["signal"]),
                noise_sd=float(rec["noise_sd"]), estimator=rec["estimator"],
                replicate=int(rec["replicate"]), pred_error=float(rec["pred_error"]),
                est_error=float(rec["est_error"]), tp=int(rec["tp"]), fp=int(rec["fp"]),
                exact_support=rec["exact_support"] == "true",
                runtime_seconds=float(rec["runtime_seconds"]),
            ))
        return cls(rows)


def _solver_seed(config: SimConfig, replicate: int) -> int:
    return int(np.random.SeedSequence([config.seed, replicate, config.n]).generate_state(1)[0])


def _run_replicate(task) -> RateRow:
    config, replicate, estimator, tuning, opts, timing = task
    with threadpool_limits(limits=1):
        data = gen_dataset(config, replicate)
        start = time.perf_counter()
        error = None
        try:
            coef = fit_estimator(data.x, data.y, config.r, estimator, tuning,
                                 with_seed(opts, _solver_seed(config, replicate)))
            metrics = evaluate_fit(coef, data.c0, data.x, config.s)
        except SrrrError as exc:
            error = f"{exc.category}: {exc}"
            metrics = {"pred_error": math.nan, "est_error": math.nan, "tp": 0,
                       "fp": 0, "exact_support": False}
        elapsed = time.perf_counter() - start if timing else math.nan
    return RateRow(
        n=config.n, p=config.p, q=config.q, r=config.r, s=config.s,
        rho=float(config.rho), signal=float(config.signal),
        noise_sd=float(config.noise_sd), estimator=estimator, replicate=replicate,
        runtime_seconds=elapsed, error=error, **metrics,
    )


def run_rate_experiment(
    base: SimConfig,
    n_grid=None,
    estimator: str = "adaptive",
    tuning: dict | None = None,
    opts: SolverOptions | None = None,
    threads: int = 1,
    timing: bool = False,
    log=None,
) -> RateTable:
    """Generate, fit and score ``base.replicates`` datasets per sample size.

    Rows come back sorted by ``(n, replicate)`` and are identical for any
    ``threads``.  ``runtime_seconds`` is NaN unless ``timing`` is set, which
    keeps the table byte-reproducible.
    """
    if estimator not in ESTIMATORS:
        raise ArgumentError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")
    n_grid = [base.n] if n_grid is None else [int(v) for v in n_grid]
    if not n_grid or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ArgumentError("n_grid must be non-empty and strictly increasing")
    threads = max(1, int(threads))
    tasks = [
        (replace(base, n=n), rep, estimator, tuning, opts, timing)
        for n in n_grid
        for rep in range(base.replicates)
    ]
    if threads == 1:
        rows = []
        for n in n_grid:
            rows.extend(_run_replicate(t) for t in tasks if t[0].n == n)
            if log is not None:
                log(f"n={n}: {base.replicates} replicates done")
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_run_replicate, tasks, chunksize=1))
    rows.sort(key=lambda row: (row.n, row.replicate))
    return RateTable(rows)


def config_dict(config: SimConfig) -> dict:
    return asdict(config)


def default_threads() -> int:
    return os.cpu_count() or 1
