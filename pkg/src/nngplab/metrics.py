"""Empirical distances and the conditional-Gaussian W2 bound.

One-dimensional probability metrics on samples:

* Kolmogorov distance against a centered Gaussian, from both one-sided
  empirical CDF values at each order statistic.
* W_p (p in {1, 2}) between two equal-size samples via the sorted
  coupling, which is the exact optimal transport in one dimension.
* W_p against a centered Gaussian via deterministic quantiles at the
  plotting positions (i - 0.5)/n, which halves the Monte Carlo noise of a
  two-sample comparison.

Gaussian CDF and quantile values come from the Cephes rational
approximations exposed as scipy.special.ndtr and ndtri, accurate to about
1e-15 absolute (CDF) and 1e-10 (quantile), well inside the tolerances
used here.

The module also estimates the Hilbert-Schmidt moments of the scalar
conditional covariance A = v I of a network's last layer and evaluates the
entropic W2 bound

    sqrt(m2)/sqrt(k) + 2^{3/2} d^{1/4} k^{-3/2} sqrt(m4)

between the conditionally Gaussian output and its limit N(0, k I), where
m_p = E ||A - K||_HS^p and for scalar multiples ||A - K||_HS =
sqrt(d) |v - k|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import ConfigError, DegenerateKernelError
from .network import get_activation

__all__ = [
    "DistanceReport",
    "HsMomentEstimate",
    "ConditionalCovariance",
    "METRIC_NAMES",
    "kolmogorov_distance",
    "wasserstein_p_empirical",
    "wasserstein_p_vs_gaussian",
    "compute_distances",
    "conditional_variance",
    "estimate_hs_moments",
    "entropic_w2_bound",
]

METRIC_NAMES = ("kolmogorov", "w1", "w2")


@dataclass(frozen=True)
class DistanceReport:
    """Distances of one width cell, aggregated over repetitions."""

    kolmogorov: float | None
    w1: float | None
    w2: float | None
    kolmogorov_std: float | None
    w1_std: float | None
    w2_std: float | None
    sample_count: int
    repetitions: int

    def value(self, metric: str) -> float | None:
        return getattr(self, _metric_field(metric))

    def std(self, metric: str) -> float | None:
        return getattr(self, _metric_field(metric) + "_std")


def _metric_field(metric: str) -> str:
    if metric not in METRIC_NAMES:
        raise ConfigError(f"metric: unknown metric {metric!r}; expected one of {METRIC_NAMES}")
    return metric


@dataclass(frozen=True)
class HsMomentEstimate:
    """Estimate of E ||A - K||_HS^p with its standard error."""

    p: int
    value: float
    standard_error: float


@dataclass(frozen=True)
class ConditionalCovariance:
    """Scalar conditional covariance A = v I_dim of the last layer."""

    v: float
    dim: int


def _as_sorted(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    return np.sort(x)


def kolmogorov_distance(samples, limit_variance: float) -> float:
    """sup_x |F_emp(x) - Phi_{0,variance}(x)| over the sample points."""
    if not limit_variance > 0.0:
        raise ConfigError(f"limit_variance: must be positive, got {limit_variance}")
    x = _as_sorted(samples)
    n = x.size
    if n < 2:
        raise ConfigError(f"samples: need >= 2 samples, got {n}")
    cdf = ndtr(x / np.sqrt(limit_variance))
    upper = np.arange(1, n + 1) / n
    lower = np.arange(0, n) / n
    return float(max(np.max(upper - cdf), np.max(cdf - lower)))


def _check_p(p: int) -> int:
    if p not in (1, 2):
        raise ConfigError(f"p: Wasserstein order must be 1 or 2, got {p}")
    return p


def wasserstein_p_empirical(a, b, p: int) -> float:
    """Exact W_p between two equal-size empirical measures (sorted coupling)."""
    _check_p(p)
    av = _as_sorted(a)
    bv = _as_sorted(b)
    if av.size != bv.size:
        raise ConfigError(
            f"samples: two-sample W_p needs equal lengths, got {av.size} and {bv.size}"
        )
    if av.size < 1:
        raise ConfigError("samples: need >= 1 sample per side")
    d = np.abs(av - bv)
    if p == 1:
        return float(d.mean())
    return float(np.sqrt(np.mean(d * d)))


def gaussian_plotting_quantiles(n: int, variance: float) -> np.ndarray:
    """Gaussian quantiles at the plotting positions (i - 0.5)/n, i = 1..n."""
    levels = (np.arange(1, n + 1) - 0.5) / n
    return ndtri(levels) * np.sqrt(variance)


def wasserstein_p_vs_gaussian(samples, variance: float, p: int) -> float:
    """Sorted-coupling W_p between samples and N(0, variance) quantiles."""
    _check_p(p)
    if not variance > 0.0:
        raise ConfigError(f"variance: must be positive, got {variance}")
    x = _as_sorted(samples)
    if x.size < 2:
        raise ConfigError(f"samples: need >= 2 samples, got {x.size}")
    q = gaussian_plotting_quantiles(x.size, variance)
    d = np.abs(x - q)
    if p == 1:
        return float(d.mean())
    return float(np.sqrt(np.mean(d * d)))


def compute_distances(samples, limit_variance: float, metrics=METRIC_NAMES) -> dict[str, float]:
    """Requested distances between samples and the limit N(0, variance)."""
    out: dict[str, float] = {}
    for metric in metrics:
        _metric_field(metric)
        if metric == "kolmogorov":
            out[metric] = kolmogorov_distance(samples, limit_variance)
        else:
            out[metric] = wasserstein_p_vs_gaussian(samples, limit_variance, int(metric[1]))
    return out


def conditional_variance(z_L, c_w: float, activation, dim: int = 1) -> ConditionalCovariance:
    """v = (C_W / n_L) sum_i sigma(z_i)^2, the last layer's conditional variance."""
    if not c_w > 0.0:
        raise ConfigError(f"c_w: must be positive, got {c_w}")
    act = get_activation(activation)
    z = np.asarray(z_L, dtype=float).ravel()
    s = act.fn(z)
    return ConditionalCovariance(v=float(c_w * (s @ s) / z.size), dim=dim)


def estimate_hs_moments(v_samples, dim: int, k_limit: float, p: int) -> HsMomentEstimate:
    """Mean of (sqrt(dim) |v_i - k_limit|)^p with its standard error."""
    if p not in (2, 4):
        raise ConfigError(f"p: Hilbert-Schmidt moment order must be 2 or 4, got {p}")
    if dim < 1:
        raise ConfigError(f"dim: must be >= 1, got {dim}")
    v = np.asarray(v_samples, dtype=float).ravel()
    if v.size < 2:
        raise ConfigError(f"v_samples: need >= 2 samples, got {v.size}")
    hs = np.sqrt(dim) * np.abs(v - k_limit)
    vals = hs**p
    return HsMomentEstimate(
        p=p,
        value=float(vals.mean()),
        standard_error=float(vals.std(ddof=1) / np.sqrt(v.size)),
    )


def entropic_w2_bound(k_limit: float, dim: int, m2, m4) -> float:
    """W2 bound between sqrt(A) N and sqrt(K) N for A = v I, K = k I.

    Evaluates sqrt(m2)/sqrt(k) + 2^{3/2} dim^{1/4} k^{-3/2} sqrt(m4) with
    m2 = E||A - K||_HS^2 and m4 = E||A - K||_HS^4.  The smallest eigenvalue
    of K = k I is k itself.
    """
    if not k_limit > 0.0:
        raise DegenerateKernelError(
            f"k_limit = {k_limit} is not positive, so the limit covariance is not invertible"
        )
    if dim < 1:
        raise ConfigError(f"dim: must be >= 1, got {dim}")
    m2v = float(getattr(m2, "value", m2))
    m4v = float(getattr(m4, "value", m4))
    if m2v < 0.0:
        raise ConfigError(f"m2: moment must be nonnegative, got {m2v}")
    if m4v < 0.0:
        raise ConfigError(f"m4: moment must be nonnegative, got {m4v}")
    return float(
        np.sqrt(m2v) / np.sqrt(k_limit)
        + 2.0**1.5 * dim**0.25 * k_limit**-1.5 * np.sqrt(m4v)
    )
