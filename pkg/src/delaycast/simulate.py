"""Ogata thinning simulation and Hawkes forecasts.

Between events the exponential-kernel intensity only decays, so the
intensity just after the current time is a valid thinning bound until the
next accepted event.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .data import EventSeries
from .hawkes import HawkesParams, compensator

MAX_EVENTS = 10_000_000
_MASK64 = (1 << 64) - 1


class SimulationOverflowError(RuntimeError):
    pass


def mix_seed(seed: int, index: int) -> int:
    """Derive a child seed with one splitmix64 round over ``seed ^ golden * (index + 1)``."""
    z = (int(seed) ^ ((0x9E3779B97F4A7C15 * (int(index) + 1)) & _MASK64)) & _MASK64
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _excitation(params: HawkesParams, times: np.ndarray, t: float) -> float:
    """``sum_{T_i <= t} alpha exp(-beta (t - T_i))``."""
    if len(times) == 0:
        return 0.0
    k = int(np.searchsorted(times, t, side="right"))
    if k == 0:
        return 0.0
    return float(params.alpha * np.sum(np.exp(-params.beta * (t - times[:k]))))


class _Draws:
    """Buffered exponential/uniform draws from one generator."""

    def __init__(self, rng: np.random.Generator, chunk: int = 4096):
        self.rng, self.chunk = rng, chunk
        self._refill()

    def _refill(self):
        self.e = self.rng.standard_exponential(self.chunk)
        self.u = self.rng.random(self.chunk)
        self.i = 0

    def next(self):
        if self.i == self.chunk:
            self._refill()
        i = self.i
        self.i += 1
        return self.e[i], self.u[i]


def simulate(params: HawkesParams, history: EventSeries | None, t_start: float, t_end: float,
             seed: int, max_events: int | None = None) -> EventSeries:
    """Simulate events in ``(t_start, t_end]`` conditioned on ``history``.

    A supercritical process (``alpha/beta >= 1``) requires an explicit
    ``max_events``; otherwise the cap defaults to ``MAX_EVENTS``.
    """
    if not t_end > t_start:
        raise ValueError("t_end must exceed t_start")
    past = history.times if history is not None else np.empty(0)
    if len(past) and t_start < past[-1]:
        raise ValueError("t_start precedes the last history event")
    if max_events is None:
        if not params.is_stable:
            raise ValueError("supercritical parameters need an explicit max_events")
        max_events = MAX_EVENTS

    mu, alpha, beta = params.mu, params.alpha, params.beta
    draws = _Draws(np.random.default_rng(seed))
    excite = _excitation(params, past, t_start)
    t = t_start
    out = []
    while True:
        bound = mu + excite
        e, u = draws.next()
        w = e / bound
        t += w
        if t > t_end:
            break
        excite *= math.exp(-beta * w)
        lam = mu + excite
        assert lam <= bound * (1 + 1e-12)
        if u * bound <= lam:
            out.append(t)
            if len(out) > max_events:
                raise SimulationOverflowError(f"more than {max_events} events simulated")
            excite += alpha
    return EventSeries(np.array(out), t_end, history.origin if history is not None else None)


@dataclass(frozen=True)
class NextEventForecast:
    samples: np.ndarray
    mean: float
    median: float
    quantiles: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "NextEventForecast":
        qs = (0.1, 0.5, 0.9)
        vals = np.quantile(samples, qs)
        return cls(samples, float(np.mean(samples)), float(np.median(samples)),
                   {q: float(v) for q, v in zip(qs, vals)})

    def to_dict(self, include_samples: bool = False) -> dict:
        d = {"mean": self.mean, "median": self.median, "n_samples": int(len(self.samples)),
             "quantiles": {str(k): v for k, v in self.quantiles.items()}}
        if include_samples:
            d["samples"] = self.samples.tolist()
        return d


def forecast_next_event(params: HawkesParams, history: EventSeries, now: float,
                        n_samples: int, seed: int, max_candidates: int = MAX_EVENTS) -> NextEventForecast:
    """Monte Carlo waiting time from ``now`` to the first thinned event.

    All samples start from the same intensity state and are advanced
    together; each sample stops at its first accepted candidate.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    past = history.times
    if len(past) and now < past[-1]:
        raise ValueError("now precedes the last history event")
    rng = np.random.default_rng(seed)
    mu, beta = params.mu, params.beta
    excite = np.full(n_samples, _excitation(params, past, now))
    wait = np.zeros(n_samples)
    active = np.arange(n_samples)
    rounds = 0
    while len(active):
        bound = mu + excite[active]
        w = rng.standard_exponential(len(active)) / bound
        u = rng.random(len(active))
        wait[active] += w
        excite[active] *= np.exp(-beta * w)
        accept = u * bound <= mu + excite[active]
        active = active[~accept]
        rounds += 1
        if rounds > max_candidates:
            raise SimulationOverflowError("thinning did not terminate")
    return NextEventForecast.from_samples(wait)


@dataclass(frozen=True)
class DailyForecast:
    day_index: int
    expected_count: float
    method: str

    def __post_init__(self):
        if self.expected_count < 0:
            raise ValueError("expected_count must be non-negative")


def forecast_daily(params: HawkesParams, series: EventSeries, day_start: float, day_end: float,
                   mode: str = "compensator", n_samples: int = 1000, seed: int = 0,
                   day_index: int | None = None) -> DailyForecast:
    """Expected event count in ``[day_start, day_end)``.

    ``compensator`` integrates the intensity with the realized events of the
    window in the history (an in-sample quantity).  ``monte_carlo`` simulates
    the window from events before ``day_start`` only.
    """
    if not day_start < day_end:
        raise ValueError("day_start must precede day_end")
    if day_index is None:
        day_index = int(day_start // 24.0)
    if mode == "compensator":
        lam = compensator(params, series, np.array([day_start, day_end]))
        return DailyForecast(day_index, float(lam[1] - lam[0]), mode)
    if mode == "monte_carlo":
        if n_samples < 1:
            raise ValueError("monte_carlo mode needs n_samples >= 1")
        history = series.before(day_start)
        counts = [len(simulate(params, history, day_start, day_end, mix_seed(seed, k)))
                  for k in range(n_samples)]
        return DailyForecast(day_index, float(np.mean(counts)), mode)
    raise ValueError(f"unknown mode {mode!r}")


def forecast_days(params: HawkesParams, series: EventSeries, n_days: int | None = None,
                  day_length: float = 24.0, mode: str = "compensator", n_samples: int = 1000,
                  seed: int = 0) -> list[DailyForecast]:
    """Daily forecasts for consecutive days starting at time zero."""
    if n_days is None:
        n_days = int(math.floor(series.horizon / day_length + 1e-12))
    if mode == "compensator":
        edges = np.arange(n_days + 1) * day_length
        lam = compensator(params, series, edges)
        return [DailyForecast(d, float(v), mode) for d, v in enumerate(np.diff(lam))]
    return [forecast_daily(params, series, d * day_length, (d + 1) * day_length, mode,
                           n_samples, mix_seed(seed, d), day_index=d) for d in range(n_days)]


def score_daily_rmse(forecasts, observed) -> float:
    expected = np.array([f.expected_count for f in forecasts], dtype=float)
    observed = np.asarray(observed, dtype=float)
    if len(expected) != len(observed) or len(expected) == 0:
        raise ValueError("forecasts and observations must have equal non-zero length")
    return float(np.sqrt(np.mean((expected - observed) ** 2)))


def next_event_rmse(params: HawkesParams, series: EventSeries, eval_fraction: float = 0.2,
                    n_samples: int = 1000, seed: int = 0) -> tuple[float, np.ndarray, np.ndarray]:
    """Rolling next-event evaluation over the final ``eval_fraction`` of events.

    At each event time in the evaluation tail the Monte Carlo mean waiting
    time is compared with the realized gap to the following event.
    Returns ``(rmse, predicted, realized)``.
    """
    t = series.times
    start = max(1, int(math.floor(len(t) * (1 - eval_fraction))))
    idx = range(start, len(t) - 1)
    pred = np.array([
        forecast_next_event(params, EventSeries(t[:i + 1], t[i]), t[i], n_samples, mix_seed(seed, i)).mean
        for i in idx
    ])
    real = np.array([t[i + 1] - t[i] for i in idx])
    if len(real) == 0:
        raise ValueError("evaluation window holds no event pairs")
    return float(np.sqrt(np.mean((pred - real) ** 2))), pred, real


def write_daily_forecasts(path, forecasts, observed=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["day_index", "expected_count", "observed", "method"])
        for i, f in enumerate(forecasts):
            obs = "" if observed is None else repr(float(observed[i]))
            w.writerow([f.day_index, repr(f.expected_count), obs, f.method])


def daily_forecasts_json(forecasts, observed=None) -> str:
    rows = []
    for i, f in enumerate(forecasts):
        row = {"day_index": f.day_index, "expected_count": f.expected_count, "method": f.method}
        if observed is not None:
            row["observed"] = float(observed[i])
        rows.append(row)
    return json.dumps(rows, indent=2, sort_keys=True)
