"""
Statistical helpers for Monte Carlo checks.
"""

from __future__ import annotations

from typing import Callable, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, stats

DEFAULT_ALPHA = 0.01


class KsResult(NamedTuple):
    statistic: float
    pvalue: float
    alpha: float
    critical: Optional[float] = None

    @property
    def passed(self) -> bool:
        """Equality of distributions is not rejected at level alpha."""
        return self.pvalue >= self.alpha


def ks_two_sample(
    a: Sequence[float], b: Sequence[float], alpha: float = DEFAULT_ALPHA
) -> KsResult:
    a, b = np.asarray(a), np.asarray(b)
    statistic, pvalue = stats.ks_2samp(a, b)
    return KsResult(
        float(statistic), float(pvalue), alpha, ks_critical_value(a.size, b.size, alpha)
    )


def ks_against_normal(
    sample: Sequence[float],
    loc: float = 0.0,
    scale: float = 1.0,
    alpha: float = DEFAULT_ALPHA,
) -> KsResult:
    statistic, pvalue = stats.kstest(np.asarray(sample), "norm", args=(loc, scale))
    return KsResult(float(statistic), float(pvalue), alpha)


def ks_against_cdf(
    sample: Sequence[float],
    cdf: Callable[[np.ndarray], np.ndarray],
    alpha: float = DEFAULT_ALPHA,
) -> KsResult:
    """One-sample KS test against a continuous CDF given as a vectorized callable."""
    statistic, pvalue = stats.kstest(np.asarray(sample, dtype=float), cdf)
    return KsResult(float(statistic), float(pvalue), alpha)


def reflected_bm_cdf(x0: float, t: float) -> Callable[[np.ndarray], np.ndarray]:
    """CDF of |x0 + W_t|, the law of Brownian motion from x0 >= 0 reflected at 0."""
    scale = np.sqrt(t)

    def cdf(r):
        r = np.maximum(np.asarray(r, dtype=float), 0.0)
        return stats.norm.cdf((r - x0) / scale) - stats.norm.cdf((-r - x0) / scale)

    return cdf


def ks_critical_value(n: int, m: int, alpha: float = DEFAULT_ALPHA) -> float:
    """Asymptotic two-sample KS critical distance c(α)·sqrt((n + m)/(n·m))."""
    c_alpha = np.sqrt(-0.5 * np.log(alpha / 2.0))
    return float(c_alpha * np.sqrt((n + m) / (n * m)))


def mean_with_stderr(sample: Sequence[float]) -> Tuple[float, float]:
    values = np.asarray(sample, dtype=float)
    if values.size == 0:
        return float("nan"), float("nan")
    if values.size == 1:
        return float(values[0]), 0.0
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(values.size))


def pooled_stderr(*stderrs: float) -> float:
    """Standard error of a difference of independent means."""
    return float(np.sqrt(np.sum(np.square(stderrs))))


def expected_abs_normal() -> float:
    """E|Z| for a standard normal Z, by quadrature of |z|·φ(z)."""
    value, _ = integrate.quad(lambda z: 2.0 * z * stats.norm.pdf(z), 0.0, np.inf)
    return float(value)
