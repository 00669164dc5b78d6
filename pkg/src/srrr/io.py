"""Matrix CSV files and the flat ``key = value`` run-config format.

Matrix files have no header, one row per line, comma-separated numbers.
Values are written with 17 significant digits so a write/read round trip
is exact.

Run-config files hold one ``key = value`` pair per line; ``#`` starts a
comment, blank lines are ignored, lists are comma-separated and booleans
are ``true``/``false``.  Unknown keys are rejected.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, fields

import numpy as np

from .exceptions import ArgumentError, InputFormatError
from .sim import ESTIMATORS, NOISE_KINDS, SimConfig
from .solver import SolverOptions

__all__ = ["read_matrix_csv", "write_matrix_csv", "format_matrix", "RunConfig",
           "parse_key_values", "load_run_config"]


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if not record or all(not cell.strip() for cell in record):
                continue
            try:
                values = [float(cell) for cell in record]
            except ValueError:
                bad = next(c for c in record if not _is_number(c))
                raise InputFormatError(
                    f"{path}: line {lineno}: non-numeric cell {bad.strip()!r}"
                ) from None
            if not all(math.isfinite(v) for v in values):
                raise InputFormatError(f"{path}: line {lineno}: non-finite value")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise InputFormatError(
                    f"{path}: line {lineno}: ragged row with {len(values)} "
                    f"cells, expected {width}"
                )
            rows.append(values)
    if not rows:
        raise InputFormatError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def format_matrix(m) -> str:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    return "".join(",".join(format(v, ".17g") for v in row) + "\n" for row in m)


def write_matrix_csv(path, m) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_matrix(m))


def parse_key_values(text: str, source: str = "<config>") -> dict[str, tuple[str, int]]:
    out: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputFormatError(f"{source}: line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise InputFormatError(f"{source}: line {lineno}: empty key")
        if key in out:
            raise InputFormatError(f"{source}: line {lineno}: duplicate key {key!r}")
        out[key] = (value, lineno)
    return out


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _float_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _opt_float(text):
    return None if text.lower() in ("", "none") else float(text)


_PARSERS = {
    "n": int, "p": int, "q": int, "r": int, "s": int,
    "rho": float, "signal": float, "noise_sd": float, "noise_kind": str,
    "seed": int, "replicates": int,
    "estimator": str, "n_grid": _int_list,
    "lambda_lasso": _opt_float, "lambda_adap": _opt_float, "beta": float,
    "grid_lasso": _float_list, "grid_adap": _float_list, "ridge": _opt_float,
    "tol": float, "max_outer": int, "n_starts": int,
    "timing": _bool, "out_csv": str, "out_summary": str,
}


@dataclass
class RunConfig:
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
    estimator: str = "adaptive"
    n_grid: list[int] | None = None
    lambda_lasso: float | None = None
    lambda_adap: float | None = None
    beta: float = 1.0
    grid_lasso: list[float] | None = None
    grid_adap: list[float] | None = None
    ridge: float | None = None
    tol: float = 1e-8
    max_outer: int = 500
    n_starts: int = 5
    timing: bool = False
    out_csv: str | None = None
    out_summary: str | None = None

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ArgumentError(f"estimator must be one of {ESTIMATORS}")
        if self.noise_kind not in NOISE_KINDS:
            raise ArgumentError(f"noise_kind must be one of {NOISE_KINDS}")
        self.sim_config()
        self.solver_options()

    def sim_config(self) -> SimConfig:
        names = [f.name for f in fields(SimConfig)]
        return SimConfig(**{k: getattr(self, k) for k in names})

    def solver_options(self) -> SolverOptions:
        return SolverOptions(tol=self.tol, max_outer=self.max_outer,
                             n_starts=self.n_starts, seed=self.seed)

    def tuning(self) -> dict:
        keys = ("lambda_lasso", "lambda_adap", "beta", "grid_lasso", "grid_adap", "ridge")
        return {k: getattr(self, k) for k in keys if getattr(self, k) is not None}

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        values = {}
        for key, (raw, lineno) in parse_key_values(text, source).items():
            if key not in _PARSERS:
                raise ArgumentError(f"{source}: line {lineno}: unknown key {key!r}")
            try:
                values[key] = _PARSERS[key](raw)
            except ValueError as exc:
                raise InputFormatError(f"{source}: line {lineno}: {key}: {exc}") from None
        return cls(**values)


def load_run_config(path, seed_override: str | None = None) -> RunConfig:
    """Read a run-config file; ``seed_override`` (e.g. ``$SRRR_SEED``) wins."""
    with open(path) as fh:
        config = RunConfig.from_text(fh.read(), str(path))
    if seed_override not in (None, ""):
        try:
            config.seed = int(seed_override)
        except ValueError:
            raise ArgumentError(f"SRRR_SEED must be an integer, got {seed_override!r}") from None
    return config


def check_writable(path) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory) or not os.access(directory, os.W_OK):
        raise ArgumentError(f"cannot write to {path}")
    if os.path.exists(path) and not os.access(path, os.W_OK):
        raise ArgumentError(f"cannot write to {path}")
