"""Sliding-window design matrices for next-day prediction.

Each row holds ``window`` consecutive days of per-day variables (the target
itself plus the optional calendar and weather groups), flattened oldest day
first.  The label is the target of the following day.
"""
from __future__ import annotations

import csv
import enum
import itertools
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .data import SEASONS, WEATHER_COLUMNS, DailyRecord, DailySeries

DEFAULT_WINDOW = 5


class Blend(NamedTuple):
    use_dow: bool = False
    use_season: bool = False
    use_weather: bool = False

    @property
    def groups(self) -> tuple[str, ...]:
        return tuple(g for g, on in zip(("dow", "season", "weather"), self) if on)

    @property
    def has_categorical(self) -> bool:
        return self.use_dow or self.use_season

    @property
    def label(self) -> str:
        return "+".join(("lag",) + self.groups)

    @classmethod
    def from_label(cls, label: str) -> "Blend":
        parts = set(label.split("+")) - {"lag"}
        unknown = parts - {"dow", "season", "weather"}
        if unknown:
            raise ValueError(f"unknown group(s) {sorted(unknown)}")
        return cls("dow" in parts, "season" in parts, "weather" in parts)


ALL_BLENDS = tuple(Blend(*bits) for bits in itertools.product((False, True), repeat=3))
LAG_ONLY = Blend()


class Representation(str, enum.Enum):
    RAW = "raw"
    SCALED = "scaled"
    ONEHOT = "onehot"
    SCALED_ONEHOT = "scaled_onehot"

    @property
    def scaled(self) -> bool:
        return self in (Representation.SCALED, Representation.SCALED_ONEHOT)

    @property
    def onehot(self) -> bool:
        return self in (Representation.ONEHOT, Representation.SCALED_ONEHOT)


def enumerate_experiments() -> list[tuple[Blend, Representation]]:
    """Every (blend, representation) pair with vacuous one-hot duplicates removed.

    Blends without a categorical group only get ``raw`` and ``scaled``,
    giving 6 * 4 + 2 * 2 = 28 experiments.
    """
    out = []
    for blend in ALL_BLENDS:
        reps = list(Representation) if blend.has_categorical else [Representation.RAW, Representation.SCALED]
        out.extend((blend, r) for r in reps)
    return out


@dataclass
class Scaler:
    mean: np.ndarray
    scale: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        return apply_scaler(self, X)


def fit_scaler(X_train: np.ndarray, columns: np.ndarray | None = None) -> Scaler:
    """Per-column z-scores from training rows; zero-variance and excluded columns pass through."""
    X_train = np.asarray(X_train, dtype=float)
    if X_train.ndim != 2 or X_train.shape[0] == 0:
        raise ValueError("X_train must be a non-empty 2-d array")
    mean = X_train.mean(axis=0)
    sd = X_train.std(axis=0)
    keep = sd > 0
    if columns is not None:
        keep &= np.asarray(columns, dtype=bool)
    return Scaler(np.where(keep, mean, 0.0), np.where(keep, sd, 1.0))


def apply_scaler(scaler: Scaler, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != scaler.mean.shape[0]:
        raise ValueError("column count does not match the scaler")
    return (X - scaler.mean) / scaler.scale


@dataclass
class WindowedDataset:
    X: np.ndarray
    y: np.ndarray
    row_dates: list
    feature_names: list[str]
    blend: Blend = LAG_ONLY
    representation: Representation = Representation.RAW
    scaler: Scaler | None = None
    n_dropped: int = 0
    indicator_columns: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return len(self.y)

    def rows(self, sl) -> "WindowedDataset":
        return WindowedDataset(self.X[sl], self.y[sl], list(np.asarray(self.row_dates, dtype=object)[sl]),
                               self.feature_names, self.blend, self.representation, self.scaler,
                               0, self.indicator_columns)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.feature_names + ["target"])
            for x, y in zip(self.X, self.y):
                w.writerow([repr(float(v)) for v in x] + [repr(float(y))])


class DayBlock(NamedTuple):
    """Per-day feature values for one (blend, representation)."""

    values: np.ndarray          # (n_days, k)
    names: list[str]            # per-day variable names
    indicators: np.ndarray      # (k,) bool, True for one-hot columns
    target: np.ndarray
    dates: list


def day_block(records: Sequence[DailyRecord] | DailySeries, blend: Blend,
              representation: Representation) -> DayBlock:
    records = list(records)
    n = len(records)
    cols = [np.array([r.target for r in records], dtype=float)]
    names = ["target"]
    ind = [False]
    if blend.use_dow:
        dow = np.array([r.day_of_week for r in records])
        if representation.onehot:
            cols.extend((dow == k).astype(float) for k in range(7))
            names.extend(f"dow_{k}" for k in range(7))
            ind.extend([True] * 7)
        else:
            cols.append(dow.astype(float))
            names.append("dow")
            ind.append(False)
    if blend.use_season:
        season = np.array([SEASONS.index(r.season) for r in records])
        if representation.onehot:
            cols.extend((season == k).astype(float) for k in range(4))
            names.extend(f"season_{s}" for s in SEASONS)
            ind.extend([True] * 4)
        else:
            cols.append(season.astype(float))
            names.append("season")
            ind.append(False)
    if blend.use_weather:
        w = np.array([r.weather for r in records], dtype=float).reshape(n, 4)
        cols.extend(w.T)
        names.extend(WEATHER_COLUMNS)
        ind.extend([False] * 4)
    values = np.column_stack(cols) if n else np.empty((0, len(names)))
    return DayBlock(values, names, np.array(ind), cols[0], [r.date for r in records])


def window_feature_names(day_names: Sequence[str], window: int) -> list[str]:
    return [f"{name}_lag{lag}" for lag in range(window, 0, -1) for name in day_names]


def stack_windows(block: DayBlock, order: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flatten windows over the day sequence ``order`` (indices into ``block``).

    Returns ``(X, y, target_positions)`` where row ``r`` uses days
    ``order[r : r + window]`` to predict day ``order[r + window]``.
    """
    order = np.asarray(order)
    n_rows = len(order) - window
    if n_rows < 1:
        raise ValueError(f"need more than {window} days, got {len(order)}")
    lag_idx = order[np.arange(n_rows)[:, None] + np.arange(window)[None, :]]
    X = block.values[lag_idx].reshape(n_rows, window * block.values.shape[1])
    targets = order[window:]
    return X, block.target[targets], targets


def build_windows(series: DailySeries | Sequence[DailyRecord], blend: Blend = LAG_ONLY,
                  representation: Representation | str = Representation.RAW,
                  window: int = DEFAULT_WINDOW, scale_fit_rows: int | None = None,
                  require_contiguous: bool = True) -> WindowedDataset:
    """Sliding-window dataset for one blend and representation.

    Scaled representations fit the scaler on the first ``scale_fit_rows``
    rows (all rows when ``None``); one-hot indicator columns are never
    scaled.  With ``require_contiguous`` windows that span a calendar gap
    are dropped and counted in ``n_dropped``.
    """
    representation = Representation(representation)
    records = list(series)
    if len(records) <= window:
        raise ValueError(f"series of length {len(records)} is too short for window {window}")
    block = day_block(records, blend, representation)
    X, y, pos = stack_windows(block, np.arange(len(records)), window)
    dates = [block.dates[i] for i in pos]
    n_dropped = 0
    if require_contiguous:
        ordinals = np.array([d.toordinal() for d in block.dates])
        span = ordinals[window:] - ordinals[:-window]
        ok = span == window
        n_dropped = int((~ok).sum())
        X, y = X[ok], y[ok]
        dates = [d for d, keep in zip(dates, ok) if keep]
        if len(y) == 0:
            raise ValueError("no contiguous windows in series")
    names = window_feature_names(block.names, window)
    indicators = np.tile(block.indicators, window)
    scaler = None
    if representation.scaled:
        fit_rows = X if scale_fit_rows is None else X[:scale_fit_rows]
        scaler = fit_scaler(fit_rows, columns=~indicators)
        X = apply_scaler(scaler, X)
    return WindowedDataset(X, y, dates, names, blend, representation, scaler, n_dropped, indicators)


def lag_target_columns(feature_names: Sequence[str]) -> np.ndarray:
    return np.array([i for i, n in enumerate(feature_names) if n.startswith("target_lag")], dtype=int)
