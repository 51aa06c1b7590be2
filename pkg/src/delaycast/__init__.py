"""Hawkes point-process fitting and bootstrap benchmarking for transit event counts."""
from .data import (DailyRecord, DailySeries, EventSeries, derive_calendar, parse_daily_csv,
                   parse_event_csv, synth_daily, write_daily_csv)
from .hawkes import (FitOptions, FitResult, HawkesParams, compensator, fit_mle, intensities_at_events,
                     intensity, log_likelihood, log_likelihood_grad)

__version__ = "0.1.0"

__all__ = [
    "DailyRecord", "DailySeries", "EventSeries", "FitOptions", "FitResult", "HawkesParams", "compensator",
    "derive_calendar", "fit_mle", "intensities_at_events", "intensity", "log_likelihood",
    "log_likelihood_grad", "parse_daily_csv", "parse_event_csv", "synth_daily", "write_daily_csv",
]
