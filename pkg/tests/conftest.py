import numpy as np
import pytest

from srrr import solver
from srrr.linalg import polar_factor

KKT_TOL = 1e-6
MONO_SLACK = 1e-10

# (kkt violation, worst objective increase) of every in-process fit this session
SUITE_AUDIT: list[tuple[float, float]] = []
_current: list[list] = []


def audit(x, y, lam, result):
    """Blockwise KKT violation and worst objective increase of one fit."""
    trace = np.asarray(result.objective_trace)
    increase = float(np.max(np.diff(trace), initial=0.0))
    return solver.kkt_violation(x, y, result, lam), increase


def _record(x, y, lam, result):
    entry = audit(x, y, lam, result)
    SUITE_AUDIT.append(entry)
    for records in _current:
        records.append(entry)


solver.fit_callbacks.append(_record)


@pytest.fixture(autouse=True)
def certify_every_fit():
    """Every fit_srrr call made by a test must satisfy KKT and monotonicity."""
    records = []
    _current.append(records)
    yield records
    _current.remove(records)
    for kkt, increase in records:
        assert kkt <= KKT_TOL, f"KKT violation {kkt:.3e}"
        assert increase <= MONO_SLACK, f"objective increased by {increase:.3e}"


def pytest_terminal_summary(terminalreporter):
    if not SUITE_AUDIT:
        return
    kkt = max(k for k, _ in SUITE_AUDIT)
    inc = max(i for _, i in SUITE_AUDIT)
    bad = sum(k > KKT_TOL or i > MONO_SLACK for k, i in SUITE_AUDIT)
    terminalreporter.write_line(
        f"solver audit: {len(SUITE_AUDIT)} fits, max KKT violation {kkt:.3e} "
        f"(tol {KKT_TOL:g}), max objective increase {inc:.3e} (slack {MONO_SLACK:g}), "
        f"{bad} failing"
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def low_rank_problem(rng, n, p, q, r, s=None, noise=0.0, scale=1.0):
    """Gaussian design and a rank-r coefficient with s nonzero rows."""
    s = p if s is None else s
    x = rng.standard_normal((n, p))
    b = np.zeros((p, r))
    b[:s] = scale * rng.standard_normal((s, r))
    a, _ = polar_factor(rng.standard_normal((q, r)))
    c0 = b @ a.T
    y = x @ c0 + noise * rng.standard_normal((n, q))
    return x, y, c0
