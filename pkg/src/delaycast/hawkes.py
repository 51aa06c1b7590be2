"""Exponential-kernel Hawkes process: intensity, compensator, likelihood, MLE.

The conditional intensity is

    lambda(t) = mu + sum_{T_i < t} alpha * exp(-beta * (t - T_i))

and the log-likelihood on ``[0, T]`` is ``sum_i log lambda(T_i) - Lambda(T)``.
Event-time quantities use the usual O(N) recursion

    A_1 = 0,  A_i = exp(-beta (T_i - T_{i-1})) * (1 + A_{i-1})

so that ``lambda(T_i) = mu + alpha * A_i``.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit
from scipy.optimize import minimize

from .data import EventSeries

LN2 = math.log(2.0)
DEFAULT_TRUNCATION = 20.0  # half-lives


class InsufficientDataError(ValueError):
    pass


class NonConvergenceError(RuntimeError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NumericError(FloatingPointError):
    pass


@dataclass(frozen=True)
class HawkesParams:
    mu: float
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("mu", "alpha", "beta"):
            v = float(getattr(self, name))
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and positive, got {v}")
            object.__setattr__(self, name, v)

    @property
    def branching_ratio(self) -> float:
        return self.alpha / self.beta

    @property
    def half_life(self) -> float:
        return LN2 / self.beta

    @property
    def is_stable(self) -> bool:
        return self.branching_ratio < 1.0

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.alpha, self.beta])

    def to_dict(self) -> dict:
        return {"mu": self.mu, "alpha": self.alpha, "beta": self.beta,
                "branching_ratio": self.branching_ratio, "half_life": self.half_life,
                "stable": self.is_stable}

    @classmethod
    def from_dict(cls, d: dict) -> "HawkesParams":
        return cls(float(d["mu"]), float(d["alpha"]), float(d["beta"]))


def branching_ratio(params: HawkesParams) -> float:
    return params.branching_ratio


def half_life(params: HawkesParams) -> float:
    return params.half_life


@dataclass(frozen=True)
class FitResult:
    params: HawkesParams
    log_likelihood: float
    n_events: int
    converged: bool
    n_iterations: int
    n_restarts_used: int
    gradient_norm: float = field(default=float("nan"))
    restart_log_likelihoods: tuple = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = self.params.to_dict()
        d["restart_log_likelihoods"] = list(self.restart_log_likelihoods)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        return cls(
            params=HawkesParams.from_dict(d["params"]),
            log_likelihood=float(d["log_likelihood"]),
            n_events=int(d["n_events"]),
            converged=bool(d["converged"]),
            n_iterations=int(d["n_iterations"]),
            n_restarts_used=int(d["n_restarts_used"]),
            gradient_norm=float(d.get("gradient_norm", float("nan"))),
            restart_log_likelihoods=tuple(d.get("restart_log_likelihoods", ())),
        )

    @classmethod
    def from_json(cls, text: str) -> "FitResult":
        return cls.from_dict(json.loads(text))


# --- recursions -------------------------------------------------------------

@njit(cache=True, nogil=True)
def _excitation_at_events(times, beta):
    n = times.shape[0]
    a = np.zeros(n)
    for i in range(1, n):
        a[i] = math.exp(-beta * (times[i] - times[i - 1])) * (1.0 + a[i - 1])
    return a


@njit(cache=True, nogil=True)
def _loglik_and_grad(times, horizon, mu, alpha, beta):
    n = times.shape[0]
    sum_log = 0.0
    g_mu = 0.0
    g_alpha = 0.0
    g_beta = 0.0
    a = 0.0
    b = 0.0
    for i in range(n):
        if i > 0:
            d = times[i] - times[i - 1]
            e = math.exp(-beta * d)
            b = e * (b + d * (1.0 + a))
            a = e * (1.0 + a)
        lam = mu + alpha * a
        sum_log += math.log(lam)
        g_mu += 1.0 / lam
        g_alpha += a / lam
        g_beta -= alpha * b / lam
    kern = 0.0
    kern_dt = 0.0
    for i in range(n):
        s = horizon - times[i]
        e = math.exp(-beta * s)
        kern += 1.0 - e
        kern_dt += s * e
    ll = sum_log - mu * horizon - alpha / beta * kern
    g_mu -= horizon
    g_alpha -= kern / beta
    g_beta += alpha / (beta * beta) * kern - alpha / beta * kern_dt
    return ll, g_mu, g_alpha, g_beta


@njit(cache=True, nogil=True)
def _compensator_at(times, a_events, mu, alpha, beta, query):
    # Lambda(t) for sorted or unsorted query points, strict history T_i < t.
    out = np.empty(query.shape[0])
    for q in range(query.shape[0]):
        t = query[q]
        lo = 0
        hi = times.shape[0]
        while lo < hi:
            mid = (lo + hi) // 2
            if times[mid] < t:
                lo = mid + 1
            else:
                hi = mid
        k = lo
        if k == 0:
            out[q] = mu * t
        else:
            decay = math.exp(-beta * (t - times[k - 1])) * (1.0 + a_events[k - 1])
            out[q] = mu * t + alpha / beta * (k - decay)
    return out


@njit(cache=True, nogil=True)
def _truncated_intensity(times, mu, alpha, beta, query, window):
    out = np.empty(query.shape[0])
    for q in range(query.shape[0]):
        t = query[q]
        hi = np.searchsorted(times, t, side="left")
        lo = np.searchsorted(times, t - window, side="left")
        s = 0.0
        for i in range(lo, hi):
            s += math.exp(-beta * (t - times[i]))
        out[q] = mu + alpha * s
    return out


def _check_range(series: EventSeries, t: np.ndarray):
    if np.any(t < 0) or np.any(t > series.horizon):
        raise ValueError(f"time outside [0, {series.horizon}]")


def _require_increasing(series: EventSeries):
    if not series.strictly_increasing:
        raise ValueError("event times must be strictly increasing")


# --- public evaluation API --------------------------------------------------

def intensity(params: HawkesParams, series: EventSeries, t, truncation_half_lives: float = DEFAULT_TRUNCATION):
    """Conditional intensity at ``t`` (scalar or array).

    Only events within ``truncation_half_lives`` half-lives of ``t`` are
    summed; pass ``math.inf`` for the exact value.
    """
    if not truncation_half_lives > 0:
        raise ValueError("truncation_half_lives must be positive")
    scalar = np.ndim(t) == 0
    q = np.atleast_1d(np.asarray(t, dtype=float))
    _check_range(series, q)
    window = truncation_half_lives * params.half_life
    out = _truncated_intensity(series.times, params.mu, params.alpha, params.beta, q,
                               window if math.isfinite(window) else np.inf)
    return float(out[0]) if scalar else out


def intensities_at_events(params: HawkesParams, series: EventSeries) -> np.ndarray:
    _require_increasing(series)
    return params.mu + params.alpha * _excitation_at_events(series.times, params.beta)


def compensator(params: HawkesParams, series: EventSeries, t):
    """Closed-form ``Lambda(t) = mu t + (alpha/beta) sum_{T_i<t} (1 - exp(-beta (t - T_i)))``."""
    scalar = np.ndim(t) == 0
    q = np.atleast_1d(np.asarray(t, dtype=float))
    _check_range(series, q)
    a = _excitation_at_events(series.times, params.beta)
    out = _compensator_at(series.times, a, params.mu, params.alpha, params.beta, q)
    return float(out[0]) if scalar else out


def log_likelihood(params: HawkesParams, series: EventSeries) -> float:
    _require_increasing(series)
    ll = _loglik_and_grad(series.times, series.horizon, params.mu, params.alpha, params.beta)[0]
    if not math.isfinite(ll):
        raise NumericError("log-likelihood is not finite")
    return ll


def log_likelihood_grad(params: HawkesParams, series: EventSeries) -> np.ndarray:
    """Analytic gradient ``(d/dmu, d/dalpha, d/dbeta)`` of the log-likelihood."""
    _require_increasing(series)
    _, gm, ga, gb = _loglik_and_grad(series.times, series.horizon, params.mu, params.alpha, params.beta)
    g = np.array([gm, ga, gb])
    if not np.all(np.isfinite(g)):
        raise NumericError("gradient overflow")
    return g


# --- fitting ----------------------------------------------------------------

BRANCHING_GRID = (0.2, 0.5, 0.8)
HALF_LIFE_GRID = (0.1, 1.0, 10.0)  # hours


@dataclass(frozen=True)
class FitOptions:
    n_restarts: int = 5
    max_iterations: int = 500
    tolerance: float = 1e-8
    seed: int = 0
    threads: int = 1


def initial_points(series: EventSeries, n_restarts: int, seed: int) -> list[np.ndarray]:
    """Starting ``(mu, alpha, beta)`` triples, one per restart.

    ``mu`` starts at half the empirical rate; ``(alpha, beta)`` come from the
    branching-ratio x half-life grid, drawn without replacement until the
    grid is exhausted.
    """
    rng = np.random.default_rng(seed)
    grid = [(n, h) for n in BRANCHING_GRID for h in HALF_LIFE_GRID]
    order = list(rng.permutation(len(grid)))
    while len(order) < n_restarts:
        order.extend(rng.permutation(len(grid)))
    mu0 = 0.5 * len(series) / series.horizon
    points = []
    for k in range(n_restarts):
        n, h = grid[order[k]]
        beta = LN2 / h
        points.append(np.array([mu0, n * beta, beta]))
    return points


def _fit_one(series: EventSeries, start: np.ndarray, options: FitOptions):
    times, horizon = series.times, series.horizon
    scale = 1.0 / len(times)

    def objective(theta):
        # line searches can probe huge steps; treat overflow as an infinite loss
        if np.any(theta > 700.0):
            return np.inf, np.zeros(3)
        mu, alpha, beta = np.exp(theta)
        ll, gm, ga, gb = _loglik_and_grad(times, horizon, mu, alpha, beta)
        if not math.isfinite(ll):
            return np.inf, np.zeros(3)
        grad = np.array([gm * mu, ga * alpha, gb * beta])
        return -ll * scale, -grad * scale

    res = minimize(objective, np.log(start), jac=True, method="BFGS",
                   options={"gtol": options.tolerance, "maxiter": options.max_iterations})
    theta = res.x
    ll, gm, ga, gb = _loglik_and_grad(times, horizon, *np.exp(theta))
    gnorm = float(np.linalg.norm(np.array([gm, ga, gb]) * np.exp(theta)) * scale)
    # BFGS often stops on "precision loss" at a genuine optimum; accept a
    # small log-space gradient as convergence in that case.
    converged = bool(math.isfinite(ll) and (res.success or gnorm < 1e-5))
    return theta, ll, converged, int(res.nit), gnorm


def fit_mle(series: EventSeries, options: FitOptions | None = None, **overrides) -> FitResult:
    """Maximum-likelihood fit over ``(log mu, log alpha, log beta)`` with multi-start BFGS.

    The best restart by log-likelihood wins; ties go to the lowest restart
    index.  Raises :class:`NonConvergenceError` (carrying the best-effort
    result) when no restart converges.
    """
    options = options or FitOptions()
    if overrides:
        options = FitOptions(**{**asdict(options), **overrides})
    if len(series) < 3:
        raise InsufficientDataError(f"need at least 3 events, got {len(series)}")
    _require_increasing(series)
    starts = initial_points(series, options.n_restarts, options.seed)
    if options.threads > 1:
        with ThreadPoolExecutor(options.threads) as pool:
            runs = list(pool.map(lambda s: _fit_one(series, s, options), starts))
    else:
        runs = [_fit_one(series, s, options) for s in starts]

    lls = [r[1] if math.isfinite(r[1]) else -np.inf for r in runs]
    best = int(np.argmax(lls))  # first maximum = lowest restart index
    theta, ll, converged, nit, gnorm = runs[best]
    result = FitResult(
        params=HawkesParams(*np.exp(theta)),
        log_likelihood=float(ll),
        n_events=len(series),
        converged=converged,
        n_iterations=nit,
        n_restarts_used=len(runs),
        gradient_norm=gnorm,
        restart_log_likelihoods=tuple(float(x) for x in lls),
    )
    if not any(r[2] for r in runs):
        raise NonConvergenceError("no restart converged", result)
    if not converged:
        # best likelihood came from a non-converged restart; prefer the best converged one
        ok = [i for i, r in enumerate(runs) if r[2]]
        alt = max(ok, key=lambda i: (lls[i], -i))
        if lls[alt] >= ll - 1e-9 * abs(ll):
            theta, ll, converged, nit, gnorm = runs[alt]
            result = FitResult(HawkesParams(*np.exp(theta)), float(ll), len(series), converged,
                               nit, len(runs), gnorm, result.restart_log_likelihoods)
    return result


def kernel(params: HawkesParams, u) -> np.ndarray:
    """Triggering kernel ``g(u) = alpha exp(-beta u)``."""
    u = np.asarray(u, dtype=float)
    return params.alpha * np.exp(-params.beta * u)


def save_params(params: HawkesParams, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({k: format(v, ".17g") for k, v in
                   (("mu", params.mu), ("alpha", params.alpha), ("beta", params.beta))},
                  fh, indent=2, sort_keys=True)


def load_params(path) -> HawkesParams:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    if "params" in d:
        d = d["params"]
    return HawkesParams.from_dict(d)
