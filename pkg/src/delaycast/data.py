"""Ingestion of daily-aggregate and event-timestamp CSV files.

Daily files carry one row per calendar day with a target value (delay count
or gated entries) and four weather covariates.  Event files carry one
ISO-8601 timestamp per row and are converted to hours since an origin.
"""
from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

WEATHER_COLUMNS = ("pressure", "wind_speed", "avg_temp", "precipitation")
CANONICAL_COLUMNS = ("date", "target") + WEATHER_COLUMNS
SEASONS = ("winter", "spring", "summer", "fall")

TIE_EPSILON = 1e-6  # hours


class DataError(ValueError):
    """Base class for ingestion problems."""


class SchemaError(DataError):
    def __init__(self, column: str, path: str | Path | None = None):
        self.column = column
        where = f"{path}: " if path is not None else ""
        super().__init__(f"{where}missing column {column!r}")


class RowError(DataError):
    def __init__(self, line: int, message: str, path: str | Path | None = None):
        self.line = line
        where = f"{path}:" if path is not None else "line "
        super().__init__(f"{where}{line}: {message}")


class DuplicateDateError(DataError):
    pass


class EmptySeriesError(DataError):
    pass


class EventRangeError(DataError):
    pass


def derive_calendar(date: dt.date) -> tuple[int, str]:
    """Return ``(day_of_week, season)`` for a date.

    Monday is 0.  Seasons follow meteorological months: Dec-Feb winter,
    Mar-May spring, Jun-Aug summer, Sep-Nov fall.
    """
    return date.weekday(), SEASONS[(date.month % 12) // 3]


@dataclass(frozen=True)
class DailyRecord:
    date: dt.date
    target: float
    pressure: float = 0.0
    wind_speed: float = 0.0
    avg_temp: float = 0.0
    precipitation: float = 0.0

    def __post_init__(self):
        if not self.target >= 0:
            raise DataError(f"{self.date}: target must be non-negative, got {self.target}")

    @property
    def day_of_week(self) -> int:
        return self.date.weekday()

    @property
    def season(self) -> str:
        return derive_calendar(self.date)[1]

    @property
    def weather(self) -> tuple[float, float, float, float]:
        return (self.pressure, self.wind_speed, self.avg_temp, self.precipitation)


@dataclass(frozen=True)
class DailySeries:
    """Chronologically ordered daily records with strictly increasing dates."""

    records: tuple[DailyRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        for prev, cur in zip(self.records, self.records[1:]):
            if cur.date == prev.date:
                raise DuplicateDateError(f"duplicate date {cur.date.isoformat()}")
            if cur.date < prev.date:
                raise DataError(f"dates out of order at {cur.date.isoformat()}")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def dates(self) -> list[dt.date]:
        return [r.date for r in self.records]

    @property
    def targets(self) -> np.ndarray:
        return np.array([r.target for r in self.records], dtype=float)

    @property
    def weather(self) -> np.ndarray:
        return np.array([r.weather for r in self.records], dtype=float).reshape(len(self), 4)

    @property
    def day_of_week(self) -> np.ndarray:
        return np.array([r.day_of_week for r in self.records], dtype=int)

    @property
    def season_index(self) -> np.ndarray:
        return np.array([SEASONS.index(r.season) for r in self.records], dtype=int)

    def gaps(self) -> list[tuple[dt.date, dt.date, int]]:
        """List of ``(before, after, missing_days)`` for every hole in the calendar."""
        out = []
        for prev, cur in zip(self.records, self.records[1:]):
            missing = (cur.date - prev.date).days - 1
            if missing > 0:
                out.append((prev.date, cur.date, missing))
        return out

    def is_contiguous(self) -> bool:
        return not self.gaps()

    def summary(self) -> dict:
        y = self.targets
        return {
            "rows": len(self),
            "start": self.records[0].date.isoformat() if self.records else None,
            "end": self.records[-1].date.isoformat() if self.records else None,
            "target_min": float(y.min()) if len(y) else None,
            "target_max": float(y.max()) if len(y) else None,
            "gaps": [
                {"after": a.isoformat(), "before": b.isoformat(), "missing_days": m}
                for a, b, m in self.gaps()
            ],
        }


def _resolve_schema(schema: Mapping[str, str] | None) -> dict[str, str]:
    resolved = {c: c for c in CANONICAL_COLUMNS}
    if schema:
        unknown = set(schema) - set(CANONICAL_COLUMNS)
        if unknown:
            raise DataError(f"unknown canonical column(s) in schema: {sorted(unknown)}")
        resolved.update(schema)
    return resolved


def _parse_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def parse_daily_csv(path: str | Path, schema: Mapping[str, str] | None = None,
                    max_gap: int | None = None) -> DailySeries:
    """Read a daily-aggregate CSV into a :class:`DailySeries`.

    ``schema`` maps canonical column names (``date``, ``target``,
    ``pressure``, ``wind_speed``, ``avg_temp``, ``precipitation``) to the
    header names used in the file; unmapped names are looked up verbatim.
    Rows are sorted by date on return.  Calendar gaps are allowed and
    reported by :meth:`DailySeries.gaps` unless one exceeds ``max_gap`` days.
    """
    cols = _resolve_schema(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for canon in CANONICAL_COLUMNS:
            if cols[canon] not in header:
                raise SchemaError(cols[canon], path)
        records = []
        seen: dict[dt.date, int] = {}
        for row in reader:
            line = reader.line_num
            try:
                date = dt.date.fromisoformat(row[cols["date"]].strip())
                values = {c: _parse_float(row[cols[c]]) for c in CANONICAL_COLUMNS[1:]}
                rec = DailyRecord(date=date, **values)
            except (ValueError, TypeError, AttributeError) as exc:
                raise RowError(line, str(exc), path) from exc
            if date in seen:
                raise DuplicateDateError(
                    f"{path}:{line}: duplicate date {date.isoformat()} (first seen on line {seen[date]})"
                )
            seen[date] = line
            records.append(rec)
    records.sort(key=lambda r: r.date)
    series = DailySeries(tuple(records))
    if max_gap is not None:
        for before, after, missing in series.gaps():
            if missing > max_gap:
                raise DataError(f"{path}: {missing}-day gap between {before} and {after} exceeds {max_gap}")
    return series


def write_daily_csv(series: DailySeries, path: str | Path, schema: Mapping[str, str] | None = None) -> None:
    cols = _resolve_schema(schema)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([cols[c] for c in CANONICAL_COLUMNS])
        for r in series:
            writer.writerow([r.date.isoformat()] + [repr(float(getattr(r, c))) for c in CANONICAL_COLUMNS[1:]])


@dataclass(frozen=True)
class EventSeries:
    """Event times in hours since an origin, observed on ``[0, horizon]``."""

    times: np.ndarray
    horizon: float
    origin: dt.datetime | None = field(default=None, compare=False)

    def __post_init__(self):
        t = np.array(self.times, dtype=float).reshape(-1)
        t.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "horizon", float(self.horizon))
        if len(t):
            if t[0] < 0 or t[-1] > self.horizon:
                raise EventRangeError("event times must lie in [0, horizon]")
            if np.any(np.diff(t) < 0):
                raise DataError("event times must be sorted")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def strictly_increasing(self) -> bool:
        return bool(np.all(np.diff(self.times) > 0))

    @classmethod
    def from_times(cls, times: Iterable[float], horizon: float | None = None,
                   tie_epsilon: float = TIE_EPSILON) -> "EventSeries":
        t = separate_ties(np.sort(np.asarray(list(times), dtype=float), kind="stable"), tie_epsilon)
        if horizon is None:
            horizon = float(t[-1]) if len(t) else 0.0
        return cls(t, max(float(horizon), float(t[-1]) if len(t) else 0.0))

    def before(self, t: float) -> "EventSeries":
        """Events strictly before ``t``, with the horizon moved to ``t``."""
        k = int(np.searchsorted(self.times, t, side="left"))
        return EventSeries(self.times[:k], max(t, 0.0), self.origin)

    def daily_counts(self, day_length: float = 24.0) -> np.ndarray:
        """Number of events in each ``[d, d+1)`` day window that lies fully inside the horizon."""
        n_days = int(math.floor(self.horizon / day_length + 1e-12))
        edges = np.arange(n_days + 1) * day_length
        idx = np.searchsorted(self.times, edges, side="left")
        return np.diff(idx)


def separate_ties(times: np.ndarray, eps: float = TIE_EPSILON) -> np.ndarray:
    """Shift repeated timestamps forward by ``eps`` in arrival order."""
    out = np.array(times, dtype=float)
    for i in range(1, len(out)):
        if out[i] <= out[i - 1]:
            out[i] = out[i - 1] + eps
    return out


def _hours(delta: dt.timedelta) -> float:
    return delta.total_seconds() / 3600.0


def parse_event_csv(path: str | Path, origin: dt.datetime, end: dt.datetime | None = None,
                    column: str | None = None) -> EventSeries:
    """Read event timestamps into an :class:`EventSeries` in hours since ``origin``.

    The file needs a header row; the timestamp column is ``column`` or the
    first column.  Identical timestamps are separated by ``TIE_EPSILON``.
    The horizon is the later of the last event and ``end``.
    """
    stamps = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptySeriesError(f"{path}: empty file")
        if column is None:
            pos = 0
        elif column in header:
            pos = header.index(column)
        else:
            raise SchemaError(column, path)
        for row in reader:
            if not row or not row[pos].strip():
                continue
            try:
                ts = dt.datetime.fromisoformat(row[pos].strip())
            except ValueError as exc:
                raise RowError(reader.line_num, str(exc), path) from exc
            if ts < origin:
                raise EventRangeError(f"{path}:{reader.line_num}: event {ts.isoformat()} precedes origin")
            stamps.append(_hours(ts - origin))
    if not stamps:
        raise EmptySeriesError(f"{path}: no events")
    horizon = _hours(end - origin) if end is not None else None
    series = EventSeries.from_times(stamps, horizon)
    return EventSeries(series.times, series.horizon, origin)


def write_event_csv(series: EventSeries, path: str | Path, origin: dt.datetime) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp"])
        for t in series.times:
            writer.writerow([(origin + dt.timedelta(hours=float(t))).isoformat(timespec="microseconds")])


def synth_daily(n_days: int, weekly_amplitude: float = 0.0, seasonal_amplitude: float = 0.0,
                weather_effect: float = 0.0, noise_sd: float = 0.0, seed: int = 0,
                base: float = 100.0, start: dt.date = dt.date(2019, 1, 1)) -> DailySeries:
    """Synthetic contiguous daily series with known calendar and weather structure.

    ``target = base + weekly_amplitude * sin(2 pi dow / 7)
    + seasonal_amplitude * sin(2 pi doy / 365.25)
    + weather_effect * precipitation + N(0, noise_sd)``, floored at zero.
    Weather columns are random and independent of the target unless
    ``weather_effect`` is non-zero.
    """
    if n_days < 10:
        raise ValueError("n_days must be at least 10")
    rng = np.random.default_rng(seed)
    dates = [start + dt.timedelta(days=i) for i in range(n_days)]
    dow = np.array([d.weekday() for d in dates])
    doy = np.array([d.timetuple().tm_yday for d in dates])
    phase = 2 * np.pi * doy / 365.25

    pressure = 1013.0 + rng.normal(0.0, 8.0, n_days)
    wind = np.abs(rng.normal(15.0, 6.0, n_days))
    temp = 10.0 - 12.0 * np.cos(phase) + rng.normal(0.0, 3.0, n_days)
    precip = np.where(rng.random(n_days) < 0.35, rng.exponential(5.0, n_days), 0.0)
    noise = rng.normal(0.0, noise_sd, n_days) if noise_sd > 0 else np.zeros(n_days)

    target = (base + weekly_amplitude * np.sin(2 * np.pi * dow / 7)
              + seasonal_amplitude * np.sin(phase) + weather_effect * precip + noise)
    target = np.maximum(target, 0.0)
    return DailySeries(tuple(
        DailyRecord(d, float(y), float(p), float(w), float(tc), float(pr))
        for d, y, p, w, tc, pr in zip(dates, target, pressure, wind, temp, precip)
    ))
