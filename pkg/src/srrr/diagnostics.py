"""Empirical checks of the design and noise regularity conditions.

None of these certify anything: the restricted eigenvalue constant is a
minimum over an infinite cone, and we only report the smallest ratio seen
among sampled cone members, an upper bound on the true constant.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import ArgumentError
from .linalg import as_matrix, gram, row_norms, thin_svd

__all__ = [
    "ConditionReport",
    "max_eigen_sigma",
    "re_constant_estimate",
    "re_ratio",
    "xi_statistic",
    "check_conditions",
]

REPORT_KEYS = ("max_eigenvalue", "re_constant_estimate", "re_samples", "xi_value", "notes")


@dataclass
class ConditionReport:
    max_eigenvalue: float
    re_constant_estimate: float
    re_samples: int
    xi_value: float
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in REPORT_KEYS}


def _check_symmetric(sigma: np.ndarray) -> None:
    if sigma.shape[0] != sigma.shape[1]:
        raise ArgumentError(f"sigma must be square, got {sigma.shape}")
    scale = max(1.0, float(np.abs(sigma).max()))
    if np.abs(sigma - sigma.T).max() > 1e-8 * scale:
        raise ArgumentError("sigma is not symmetric")


def max_eigen_sigma(sigma) -> float:
    """Largest eigenvalue of a symmetric PSD matrix (its top singular value)."""
    sigma = as_matrix(sigma, "sigma")
    _check_symmetric(sigma)
    return float(thin_svd(sigma).singular_values[0])


def re_ratio(sigma: np.ndarray, m: np.ndarray, s: int) -> np.ndarray:
    """``tr(M' Sigma M) / sum_{j<=s} ||m_j||^2`` for one matrix or a batch."""
    m = np.asarray(m, dtype=float)
    quad = np.einsum("...jk,jl,...lk->...", m, sigma, m)
    head = np.einsum("...jk,...jk->...", m[..., :s, :], m[..., :s, :])
    return quad / head


def _into_cone(m: np.ndarray, s: int, cone_constant: float) -> np.ndarray:
    norms = np.sqrt(np.einsum("...jk,...jk->...j", m, m))
    head = norms[..., :s].sum(axis=-1)
    tail = norms[..., s:].sum(axis=-1)
    limit = cone_constant * head
    factor = np.where(tail > limit, limit / np.where(tail > 0, tail, 1.0), 1.0)
    out = m.copy()
    out[..., s:, :] *= factor[..., None, None]
    return out


def re_constant_estimate(
    sigma,
    s: int,
    q: int,
    n_samples: int = 1000,
    seed: int = 0,
    cone_constant: float = 2.0,
    refine: int = 8,
    refine_steps: int = 50,
    return_details: bool = False,
):
    """Randomized upper bound on the restricted eigenvalue constant.

    Minimizes ``tr(M' Sigma M) / sum_{j<=s} ||m_j||^2`` over sampled
    ``p x q`` matrices ``M`` in the cone
    ``sum_{j>s} ||m_j|| <= cone_constant * sum_{j<=s} ||m_j||``:

    * Gaussian draws pulled into the cone with a random tail scale;
    * the restricted family ``m_j = 0`` for ``j > s``, including its
      minimizing direction (ratio ``lambda_min`` of the leading ``s x s``
      block of ``Sigma``);
    * a projected random local search from the ``refine`` best draws.

    The result is reproducible for a fixed ``seed``.  It is not a
    certificate: the true constant may be smaller.
    """
    sigma = as_matrix(sigma, "sigma")
    _check_symmetric(sigma)
    p = sigma.shape[0]
    if not 1 <= s < p:
        raise ArgumentError(f"need 1 <= s < p, got s={s}, p={p}")
    if q < 1 or n_samples < 1:
        raise ArgumentError("q and n_samples must be positive")
    if not cone_constant > 0:
        raise ArgumentError("cone_constant must be positive")
    rng = np.random.default_rng(seed)

    evals, evecs = np.linalg.eigh(sigma[:s, :s])
    m_min = np.zeros((p, q))
    m_min[:s, 0] = evecs[:, 0]
    restricted_min = float(re_ratio(sigma, m_min, s))

    n_restricted = max(1, n_samples // 4)
    n_gauss = n_samples - n_restricted
    best_ratio = restricted_min
    candidates = []

    if n_restricted > 1:
        draws = np.zeros((n_restricted - 1, p, q))
        draws[:, :s, :] = rng.standard_normal((n_restricted - 1, s, q))
        ratios = re_ratio(sigma, draws, s)
        best_ratio = min(best_ratio, float(ratios.min()))
        restricted_min = min(restricted_min, float(ratios.min()))

    chunk = 1024
    done = 0
    while done < n_gauss:
        size = min(chunk, n_gauss - done)
        draws = rng.standard_normal((size, p, q))
        draws[:, s:, :] *= rng.uniform(0.0, 1.0, size)[:, None, None]
        draws = _into_cone(draws, s, cone_constant)
        ratios = re_ratio(sigma, draws, s)
        order = np.argsort(ratios, kind="stable")[:refine]
        candidates.extend((float(ratios[i]), draws[i]) for i in order)
        candidates.sort(key=lambda t: t[0])
        del candidates[refine:]
        best_ratio = min(best_ratio, float(ratios.min()))
        done += size

    for ratio, m in candidates:
        step = 0.5
        for _ in range(refine_steps):
            scale = step * np.linalg.norm(m) / np.sqrt(m.size)
            proposal = _into_cone(m + scale * rng.standard_normal(m.shape), s, cone_constant)
            if not np.any(proposal[:s]):
                step *= 0.5
                continue
            r_new = float(re_ratio(sigma, proposal, s))
            if r_new < ratio:
                m, ratio = proposal, r_new
                step *= 1.5
            else:
                step *= 0.5
        best_ratio = min(best_ratio, ratio)

    estimate = max(best_ratio, 0.0)
    if return_details:
        return estimate, {
            "restricted_min": max(restricted_min, 0.0),
            "lambda_min_leading_block": float(evals[0]),
        }
    return estimate


def xi_statistic(x, e) -> float:
    """``max_j ||X_j' E||``, the largest predictor-noise correlation norm."""
    x = as_matrix(x, "x")
    e = as_matrix(e, "e")
    if x.shape[0] != e.shape[0]:
        raise ArgumentError("x and e must have the same number of rows")
    return float(row_norms(x.T @ e).max())


def check_conditions(
    x,
    s: int = 1,
    q: int = 1,
    noise_sd: float = 1.0,
    noise_kind: str = "gaussian",
    re_samples: int = 1000,
    seed: int = 0,
    cone_constant: float = 2.0,
    e=None,
) -> ConditionReport:
    """Diagnostics for a design ``x``; noise is simulated unless ``e`` is given."""
    from .sim import draw_noise

    x = as_matrix(x, "x")
    n, p = x.shape
    sigma = gram(x)
    lam_max = max_eigen_sigma(sigma)
    re_est, extra = re_constant_estimate(
        sigma, s, q, re_samples, seed, cone_constant, return_details=True
    )
    if e is None:
        rng = np.random.default_rng([seed, 1])
        e = draw_noise(rng, (n, q), noise_sd, noise_kind)
        noise_note = f"xi computed on simulated {noise_kind} noise, sd={noise_sd:g}, q={q}"
    else:
        noise_note = "xi computed on supplied noise matrix"
    notes = [
        "re_constant_estimate is a randomized upper bound, not a certificate",
        f"restricted family (rows beyond s={s} zero) minimum ratio: "
        f"{extra['restricted_min']:.17g}",
        f"cone constant: {cone_constant:g}",
        noise_note,
        f"xi normalized by sqrt(n*q*log p): "
        + (f"{xi_statistic(x, e) / np.sqrt(n * q * np.log(p)):.6g}" if p > 1 else "n/a"),
    ]
    return ConditionReport(lam_max, re_est, int(re_samples), xi_statistic(x, e), notes)
