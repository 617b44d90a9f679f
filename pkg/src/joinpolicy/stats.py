"""Reference distributions and estimators for the Monte Carlo limit checks.

All reference CDFs bottom out in the standard normal CDF, evaluated through
``math.erf`` (the C library implementation, accurate to well under 1e-12),
so Kolmogorov-Smirnov comparisons at the 1e-2 scale are not contaminated by
reference error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.stats import beta as beta_dist

from .errors import PreconditionViolated, QuadratureFailure
from .model import Moments

QUADRATURE_TOL = 1e-6
_G_TAIL_Z = 6.5   # two-sided half-normal tail beyond 6.5 sd is < 1e-10


def normal_cdf(x: float, variance: float) -> float:
    if variance <= 0:
        raise ValueError("variance must be positive")
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0 * variance)))


def folded_normal_cdf(x: float, variance: float) -> float:
    """CDF of |Z| for Z ~ N(0, variance): 2 Phi(x/sigma) - 1 on x >= 0."""
    if variance <= 0:
        raise ValueError("variance must be positive")
    if x < 0:
        return 0.0
    return math.erf(x / math.sqrt(2.0 * variance))


def mixture_scale_variance(moments: Moments) -> float:
    """Variance of the half-normal law G that mixes the component scales."""
    m = moments.as_floats()
    if m.mu <= 0 or m.sigma_r2 + m.sigma_s2 <= 0:
        raise ValueError("mixture requires mu > 0 and a positive variance sum")
    return (m.sigma_r2 + m.sigma_s2) ** 3 / (128.0 * m.mu ** 2)


def mixture_cdf(x: float, moments: Moments) -> float:
    """CDF of the centered normal scale mixture with variance law G = |N(0, v)|.

    Integrates Phi(x/t) against the density of the component standard
    deviation T = sqrt(U), U ~ |N(0, v)|.  The substitution to T tames the
    step-function behavior of the integrand as the component variance
    approaches zero.
    """
    v = mixture_scale_variance(moments)
    if x == 0.0:
        return 0.5
    if x < 0.0:
        return 1.0 - mixture_cdf(-x, moments)
    sd = math.sqrt(v)
    u_max = _G_TAIL_Z * sd
    t_max = math.sqrt(u_max)
    norm = 1.0 / math.sqrt(2.0 * math.pi * v)

    def integrand(t: float) -> float:
        # f_T(t) = 4 t phi_v(t^2); Phi evaluated at x/t
        phi_v = norm * math.exp(-(t * t) ** 2 / (2.0 * v))
        return (0.5 * (1.0 + math.erf(x / t / math.sqrt(2.0)))) * 4.0 * t * phi_v

    # Phi(x/t) has a boundary layer around t ~ x when x << sd; hand the
    # transition scales to the subdivision as explicit break points
    points = sorted({min(x, t_max), min(10.0 * x, t_max)})
    val, err = integrate.quad(integrand, 0.0, t_max, points=points,
                              epsabs=QUADRATURE_TOL / 100, limit=400)
    # truncation of G's tail enters the error budget; the discarded mass is
    # below 1e-10 and every discarded component contributes at most 1
    err_total = err + 1e-10
    if err_total > QUADRATURE_TOL:
        raise QuadratureFailure(f"quadrature error {err_total:.2e} > {QUADRATURE_TOL}")
    return min(1.0, val + 1e-10)  # add the truncated tail mass (CDF -> 1 bias side)


def mixture_second_moment_target(moments: Moments) -> float:
    """Variance of the mixture: E_G[sigma^2] = sqrt(2 v / pi)."""
    v = mixture_scale_variance(moments)
    return math.sqrt(2.0 * v / math.pi)


def standardize_matches(m_final, n: int, mu: float, alpha: float):
    """sqrt(n) [ M(n) / (alpha (1-alpha) n^2) - mu ]."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    m_final = np.asarray(m_final, dtype=np.float64)
    return math.sqrt(n) * (m_final / (alpha * (1.0 - alpha) * n * n) - mu)


def clt_variance_target(moments: Moments, alpha: float, sampling: str) -> float:
    """Asymptotic variance of the standardized match count.

    'controlled' covers policies whose selection ratio is pinned to alpha
    (alternating, greedy at alpha = 1/2); 'bernoulli' adds the penalty for
    the random selection count.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    m = moments.as_floats()
    base = ((1.0 - alpha) * m.sigma_r2 + alpha * m.sigma_s2) / (alpha * (1.0 - alpha))
    if sampling == "controlled":
        return base
    if sampling == "bernoulli":
        return base + m.mu ** 2 * (1.0 - 2.0 * alpha) ** 2 / (alpha * (1.0 - alpha))
    raise ValueError("sampling must be 'controlled' or 'bernoulli'")


def ks_distance(sample: Sequence[float], cdf: Callable[[float], float]) -> float:
    """Sup over the sorted sample of |empirical - reference| CDF."""
    xs = np.sort(np.asarray(sample, dtype=np.float64))
    if xs.size == 0:
        raise ValueError("sample must be nonempty")
    n = xs.size
    ref = np.array([cdf(float(x)) for x in xs])
    upper = np.abs(np.arange(1, n + 1) / n - ref)
    lower = np.abs(np.arange(0, n) / n - ref)
    return float(max(upper.max(), lower.max()))


def ks_critical_value(n: int, level: float = 0.01) -> float:
    """Asymptotic one-sample KS critical value at the given level."""
    return math.sqrt(-0.5 * math.log(level / 2.0)) / math.sqrt(n)


@dataclass(frozen=True)
class TailCheck:
    t: float
    bound: float
    exceedances: int
    upper_confidence: float
    passed: bool


def hoeffding_certify(r_final, n: int, moments: Moments,
                      t_grid: Sequence[float], confidence: float = 0.99):
    """Exceedance certification for the greedy selection-count tail bound.

    For each t, compares a Clopper-Pearson upper confidence bound on the
    empirical frequency of |R_G(n) - n/2| / sqrt(n) > t against the
    exponential bound 2 exp(-(mu / 2 gamma)^2 t).  Valid only for
    n >= (2 + gamma/mu)^2 and t >= 1.
    """
    m = moments.as_floats()
    n_min = (2.0 + m.gamma / m.mu) ** 2
    if n < n_min:
        raise PreconditionViolated(f"bound requires n >= {n_min:.1f}, got {n}")
    r_final = np.asarray(r_final, dtype=np.float64)
    stat = np.abs(r_final - n / 2.0) / math.sqrt(n)
    reps = len(r_final)
    rate = (m.mu / (2.0 * m.gamma)) ** 2
    out = []
    for t in t_grid:
        if t < 1.0:
            raise PreconditionViolated("bound requires t >= 1")
        k = int(np.count_nonzero(stat > t))
        if k == reps:
            ub = 1.0
        else:
            ub = float(beta_dist.ppf(confidence, k + 1, reps - k))
        bound = 2.0 * math.exp(-rate * t)
        out.append(TailCheck(float(t), bound, k, ub, ub <= bound))
    return out


@dataclass(frozen=True)
class SignChangeReport:
    replications: int
    frac_paths_with_both_signs: float
    frac_paths_alternating_ahead: float   # paths where D_n < 0 at some epoch
    frac_paths_greedy_ahead: float        # paths where D_n > 0 at some epoch
    mean_sign_changes: float
    mean_frac_negative_epochs: float
    max_scaled_gap: float                 # max over paths of max |D_n| / n^{5/4}


def sign_change_stats(batch: dict, n: int) -> SignChangeReport:
    """Aggregate the per-path sign diagnostics from a coupled batch."""
    reps = len(batch["d_final"])
    both = np.logical_and(batch["has_pos"], batch["has_neg"])
    scale = float(n) ** 1.25
    return SignChangeReport(
        replications=reps,
        frac_paths_with_both_signs=float(np.mean(both)),
        frac_paths_alternating_ahead=float(np.mean(batch["has_neg"])),
        frac_paths_greedy_ahead=float(np.mean(batch["has_pos"])),
        mean_sign_changes=float(np.mean(batch["sign_changes"])),
        mean_frac_negative_epochs=float(np.mean(batch["frac_neg"])),
        max_scaled_gap=float(np.max(batch["max_abs_d"]) / scale),
    )
