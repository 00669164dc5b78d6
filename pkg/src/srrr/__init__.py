"""Sparse reduced rank regression with adaptive group Lasso penalties."""

__version__ = "0.1.0"

from .adaptive import (
    AdaptiveConfig,
    AdaptiveFitResult,
    adaptive_weights,
    bic,
    fit_adaptive,
    fit_pilot,
    tune_bic,
    tune_pilot_bic,
)
from .diagnostics import (
    ConditionReport,
    check_conditions,
    max_eigen_sigma,
    re_constant_estimate,
    xi_statistic,
)
from .estimators import (
    AdaptiveSparseReducedRankRegressor,
    ReducedRankRegressor,
    SparseReducedRankRegressor,
)
from .exceptions import (
    ArgumentError,
    DecompositionError,
    DegenerateColumnError,
    EmptyModelError,
    IllConditionedDesignError,
    InfeasiblePointError,
    InputFormatError,
    SrrrError,
    TuningError,
)
from .linalg import ThinSvd, gram, rank_truncate, thin_svd
from .rrr import RrrFit, fit_rrr
from .sim import RateTable, SimConfig, evaluate_fit, gen_dataset, run_rate_experiment
from .solver import (
    FactoredCoefficient,
    FitResult,
    SolverOptions,
    fit_srrr,
    group_soft_threshold,
    kkt_violation,
    objective,
    solve_a_step,
    solve_b_step,
)
