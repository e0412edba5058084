"""Probability machinery: gamma fading, chi-square quantiles, class Gaussians,
and exact binomial moments.

The chi-square quantile is computed by bisection on a local implementation of
the regularized lower incomplete gamma function (series below a+1, continued
fraction above), so arbitrary degrees of freedom round-trip through the
forward CDF without table lookups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_DIVERGES_MSG = "nu diverges: channel shape must exceed 1"


@dataclass
class ChannelModel:
    """I.i.d. per-round fading gains with unit mean.

    Gains follow gamma(shape, rate=shape) so the mean is 1 for any shape;
    larger shape means less fluctuation. `fixed_gain` short-circuits the
    distribution entirely (deterministic channel for analytic cross-checks).
    """

    shape: float = 2.0
    seed: int | None = None
    fixed_gain: float | None = None
    _rng: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.fixed_gain is None and not self.shape > 1.0:
            raise ValueError(_DIVERGES_MSG)
        if self.fixed_gain is not None and not self.fixed_gain > 0.0:
            raise ValueError("fixed gain must be positive")
        self._rng = np.random.default_rng(self.seed)


def sample_gain(channel: ChannelModel, size=None):
    """Draw i.i.d. gains; deterministic under a fixed seed."""
    if channel.fixed_gain is not None:
        if size is None:
            return channel.fixed_gain
        return np.full(size, channel.fixed_gain)
    draw = channel._rng.gamma(shape=channel.shape, scale=1.0 / channel.shape, size=size)
    return float(draw) if size is None else draw


def inverse_mean_gain(channel: ChannelModel) -> float:
    """E[1/h], closed form shape/(shape-1); finite only for shape > 1."""
    if channel.fixed_gain is not None:
        return 1.0 / channel.fixed_gain
    if not channel.shape > 1.0:
        raise ValueError(_DIVERGES_MSG)
    return channel.shape / (channel.shape - 1.0)


@dataclass(frozen=True)
class ClassGaussian:
    """Per-class Gaussian fit used for clarity-threshold geometry."""

    class_id: int
    mu: np.ndarray
    sigma: np.ndarray
    sigma_inverse: np.ndarray


def fit_class_gaussian(samples, class_id: int, ridge_epsilon: float = 1e-6) -> ClassGaussian:
    """MLE mean/covariance (divisor n-1) with a small ridge for invertibility.

    Ridge is ridge_epsilon * (trace/k) * I; for zero-variance input the scale
    falls back to 1 so the result stays invertible.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if n < 2:
        raise ValueError("need at least 2 samples to fit a class Gaussian")
    mu = X.mean(axis=0)
    centered = X - mu
    sigma = centered.T @ centered / (n - 1)
    sigma = 0.5 * (sigma + sigma.T)
    if ridge_epsilon > 0.0:
        trace = float(np.trace(sigma))
        scale = trace / k if trace > 0.0 else 1.0
        sigma = sigma + ridge_epsilon * scale * np.eye(k)
    sigma_inverse = np.linalg.inv(sigma)
    if not np.allclose(sigma_inverse @ sigma, np.eye(k), atol=1e-6):
        raise np.linalg.LinAlgError("covariance too ill-conditioned to invert reliably")
    return ClassGaussian(class_id=class_id, mu=mu, sigma=sigma, sigma_inverse=sigma_inverse)


def mahalanobis(g: ClassGaussian, x) -> float:
    """sqrt((x-mu)^T Sigma^{-1} (x-mu))."""
    x = np.asarray(x, dtype=float)
    dev = x - g.mu
    value = dev @ g.sigma_inverse @ dev
    return math.sqrt(max(float(value), 0.0))


def _lower_gamma_series(a: float, x: float) -> float:
    # P(a, x) via power series, converges fast for x < a + 1
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(1000):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))

def _upper_gamma_cf(a: float, x: float) -> float:
    # Q(a, x) via Lentz continued fraction, converges fast for x >= a + 1
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def regularized_lower_gamma(a: float, x: float) -> float:
    """P(a, x) = gamma(a, x) / Gamma(a) for a > 0, x >= 0."""
    if a <= 0.0:
        raise ValueError("gamma shape parameter must be positive")
    if x < 0.0:
        raise ValueError("gamma argument must be non-negative")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return min(_lower_gamma_series(a, x), 1.0)
    return max(1.0 - _upper_gamma_cf(a, x), 0.0)


def chi2_cdf(r: float, k: float) -> float:
    """Chi-square CDF with k degrees of freedom at r >= 0."""
    if r <= 0.0:
        return 0.0
    return regularized_lower_gamma(k / 2.0, r / 2.0)


def chi2_quantile(p: float, k: float) -> float:
    """Inverse chi-square CDF by bisection; round-trips to the forward CDF.

    The clarity threshold on Mahalanobis distance is sqrt of this value.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie strictly in (0, 1), got {p}")
    if k < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {k}")
    lo, hi = 0.0, k + 10.0
    while chi2_cdf(hi, k) < p:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("chi-square quantile bracket failed")
    # bisect until the interval is far tighter than the 1e-9 CDF round-trip target
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi2_cdf(mid, k) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * max(hi, 1.0):
            break
    return 0.5 * (lo + hi)


def _binomial_pmf(n: int, q: float) -> np.ndarray:
    j = np.arange(n + 1)
    if q == 0.0 or q == 1.0:
        pmf = np.zeros(n + 1)
        pmf[n if q == 1.0 else 0] = 1.0
        return pmf
    if n <= 64:
        comb = np.array([math.comb(n, int(i)) for i in j], dtype=float)
        return comb * q ** j * (1.0 - q) ** (n - j)
    # log-space for large n: exact combinatorial products overflow float64
    log_fact = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, n + 1, dtype=float)))))
    log_pmf = (
        log_fact[n] - log_fact[j] - log_fact[n - j]
        + j * math.log(q) + (n - j) * math.log1p(-q)
    )
    return np.exp(log_pmf)


def binomial_moment(n: int, q: float, order: int) -> float:
    """Exact E[X^order] for X ~ Binomial(n, q), summed over all outcomes.

    Deliberately brute force: this is the oracle the closed-form prefetch
    policy is benchmarked against, so it must stay independent of any
    moment shortcut.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    if order < 1:
        raise ValueError("moment order must be >= 1")
    if n == 0:
        return 0.0
    pmf = _binomial_pmf(n, q)
    j = np.arange(n + 1, dtype=float)
    return float(np.sum(pmf * j ** order))


def moment_bound(mean: float, order: int) -> float:
    """Upper bound (mean + order/2)^order on the binomial order-th moment."""
    if mean < 0:
        raise ValueError("mean must be non-negative")
    if order < 1:
        raise ValueError("moment order must be >= 1")
    return (mean + order / 2.0) ** order
