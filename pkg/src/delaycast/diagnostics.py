"""Goodness-of-fit diagnostics and descriptive statistics.

Time-rescaling maps event times through the fitted compensator; under the
true model the increments are i.i.d. Exp(1) and are checked with a
Kolmogorov-Smirnov test using the asymptotic Kolmogorov distribution.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gammaln, polygamma

from .data import EventSeries
from .hawkes import HawkesParams, compensator, kernel


@dataclass(frozen=True)
class RescaledIntervals:
    u: np.ndarray

    def __len__(self):
        return len(self.u)


@dataclass(frozen=True)
class KsResult:
    d_statistic: float
    p_value: float
    n: int


@dataclass(frozen=True)
class GammaFit:
    shape: float
    scale: float
    location: float
    log_likelihood: float = float("nan")

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.location) / self.scale
        out = np.zeros_like(z)
        pos = z > 0
        out[pos] = np.exp((self.shape - 1) * np.log(z[pos]) - z[pos] - gammaln(self.shape)) / self.scale
        return out


def time_rescale(params: HawkesParams, series: EventSeries) -> RescaledIntervals:
    """Compensator increments ``u_i = Lambda(T_{i+1}) - Lambda(T_i)``."""
    if len(series) < 2:
        raise ValueError("time rescaling needs at least two events")
    if not series.strictly_increasing:
        raise ValueError("event times must be strictly increasing")
    lam = compensator(params, series, series.times)
    return RescaledIntervals(np.diff(lam))


def kolmogorov_sf(x: float, tol: float = 1e-10) -> float:
    """Survival function of the Kolmogorov distribution, ``P(K > x)``.

    Uses the alternating series for ``x >= 1`` and the theta-function form
    for small ``x`` where the alternating series converges slowly.
    """
    if x <= 0:
        return 1.0
    if x < 1.0:
        c = math.sqrt(2 * math.pi) / x
        s = 0.0
        k = 1
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * math.pi ** 2 / (8 * x * x))
            s += term
            if term < tol:
                break
            k += 1
        return min(1.0, max(0.0, 1.0 - c * s))
    s = 0.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * x * x)
        s += term if k % 2 else -term
        if term < tol:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * s))


def ks_exp1(u) -> KsResult:
    """One-sample KS test of ``u`` against Exp(1), asymptotic p-value."""
    x = np.sort(np.asarray(getattr(u, "u", u), dtype=float))
    n = len(x)
    if n == 0:
        raise ValueError("empty sample")
    cdf = -np.expm1(-x)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))
    return KsResult(d, kolmogorov_sf(math.sqrt(n) * d), n)


def ecdf_pairs(u) -> np.ndarray:
    """Rows ``(x, empirical CDF, Exp(1) CDF)`` for plotting."""
    x = np.sort(np.asarray(getattr(u, "u", u), dtype=float))
    n = len(x)
    return np.column_stack([x, np.arange(1, n + 1) / n, -np.expm1(-x)])


def cumulative_calibration(params: HawkesParams, series: EventSeries, n_grid: int = 200) -> np.ndarray:
    """Rows ``(t, N(t), Lambda(t))`` on a uniform grid over ``[0, horizon]``."""
    if n_grid < 2:
        raise ValueError("n_grid must be at least 2")
    grid = np.linspace(0.0, series.horizon, n_grid)
    counts = np.searchsorted(series.times, grid, side="right")
    return np.column_stack([grid, counts.astype(float), compensator(params, series, grid)])


def kernel_curve(params: HawkesParams, n_points: int = 200, span_half_lives: float = 6.0) -> np.ndarray:
    u = np.linspace(0.0, span_half_lives * params.half_life, n_points)
    return np.column_stack([u, kernel(params, u)])


def rice_bins(n: int) -> int:
    """Rice's rule ``ceil(2 n^(1/3))``, computed exactly as the least ``b`` with ``b^3 >= 8 n``."""
    if n < 1:
        raise ValueError("n must be positive")
    b = int(round(2 * n ** (1 / 3)))
    while b ** 3 < 8 * n:
        b += 1
    while b > 1 and (b - 1) ** 3 >= 8 * n:
        b -= 1
    return b


def histogram(samples, n_bins: int) -> list[tuple[float, float, int]]:
    """Equal-width bins over ``[min, max]``; the last bin is closed on the right.

    A constant sample gets a nominal unit-width range centred on the value.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("empty sample")
    if n_bins < 1:
        raise ValueError("n_bins must be positive")
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(x, bins=n_bins, range=(lo, hi))
    return [(float(a), float(b), int(c)) for a, b, c in zip(edges[:-1], edges[1:], counts)]


def _gamma2_mle(z: np.ndarray) -> tuple[float, float, float]:
    """Shape/scale MLE for positive data; returns ``(shape, scale, loglik)``."""
    n = len(z)
    m = z.mean()
    logz = np.log(z)
    s = math.log(m) - logz.mean()
    if not s > 0:
        return float("nan"), float("nan"), -np.inf
    k = (3 - s + math.sqrt((s - 3) ** 2 + 24 * s)) / (12 * s)
    for _ in range(100):
        f = math.log(k) - digamma(k) - s
        fp = 1 / k - polygamma(1, k)
        step = f / fp
        k_new = k - step
        if k_new <= 0:
            k_new = k / 2
        if abs(k_new - k) < 1e-12 * k:
            k = k_new
            break
        k = k_new
    theta = m / k
    ll = (k - 1) * logz.sum() - n * k - n * gammaln(k) - n * k * math.log(theta)
    return float(k), float(theta), float(ll)


def fit_gamma3(samples, n_grid: int = 50, tol: float = 1e-8) -> GammaFit:
    """Three-parameter gamma MLE by profiling the location.

    The location is scanned on a grid from ``min - 3 sd`` to ``min - 1e-6``
    and the best grid cell is refined by golden-section search.
    """
    x = np.asarray(samples, dtype=float)
    if len(x) < 20:
        raise ValueError("need at least 20 samples")
    sd = float(x.std())
    if not sd > 0:
        raise ValueError("sample variance is zero")
    xmin = float(x.min())

    def profile(loc):
        return _gamma2_mle(x - loc)[2]

    grid = np.linspace(xmin - 3 * sd, xmin - 1e-6, n_grid)
    vals = np.array([profile(g) for g in grid])
    j = int(np.argmax(vals))
    a = grid[max(j - 1, 0)]
    b = grid[min(j + 1, n_grid - 1)]

    invphi = (math.sqrt(5) - 1) / 2
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = profile(c), profile(d)
    while abs(b - a) > tol * max(1.0, abs(a)):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = profile(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = profile(d)
    loc = (a + b) / 2
    if profile(loc) < vals[j]:
        loc = grid[j]
    shape, scale, ll = _gamma2_mle(x - loc)
    if not (math.isfinite(shape) and shape > 0):
        raise ValueError("gamma fit failed")
    return GammaFit(shape, scale, float(loc), ll)


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
