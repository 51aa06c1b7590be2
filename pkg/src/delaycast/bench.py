"""Bootstrap benchmark of regression models over covariate blends.

One cycle resamples the daily records with replacement (same length as the
series), orders the resample by date, rebuilds the sliding windows for every
(blend, representation) experiment, splits the rows chronologically, fits
every model on the training rows and scores RMSE on the test rows.

Per model and cycle, the best representation of each blend gives that
blend's score.  "No additional data" is the score of the lag-only blend and
"any data" the lowest score over all blends.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import DailySeries
from .features import (ALL_BLENDS, DEFAULT_WINDOW, LAG_ONLY, Blend, Representation, WindowedDataset,
                       apply_scaler, day_block, enumerate_experiments, fit_scaler, stack_windows,
                       window_feature_names)
from .models import KINDS, NOT_IMPLEMENTED, ConvergenceError, DomainError, make_regressor
from .simulate import mix_seed

log = logging.getLogger(__name__)

GROUPS = ("dow", "season", "weather")
OK, FAILED, SKIPPED = 0, 1, 2


def train_size(n_rows: int, train_fraction: float = 0.8) -> int:
    """Nearest-integer training size, halves rounded up."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    n_train = math.floor(n_rows * train_fraction + 0.5)
    if n_train < 1 or n_train >= n_rows:
        raise ValueError(f"split of {n_rows} rows at {train_fraction} leaves an empty side")
    return n_train


def chrono_split(dataset: WindowedDataset, train_fraction: float = 0.8):
    n_train = train_size(len(dataset), train_fraction)
    return dataset.rows(slice(0, n_train)), dataset.rows(slice(n_train, None))


def rmse(pred, actual) -> float:
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if pred.shape != actual.shape or pred.size == 0:
        raise ValueError("pred and actual must have equal non-zero length")
    return float(np.sqrt(np.mean((pred - actual) ** 2)))


@dataclass(frozen=True)
class BenchConfig:
    models: tuple = KINDS
    n_cycles: int = 100
    seed: int = 0
    train_fraction: float = 0.8
    window: int = DEFAULT_WINDOW
    resample: str = "sorted"          # or "train_only"
    selection: str = "test"           # or "validation"
    scaling: str = "train"            # or "full"
    validation_fraction: float = 0.2
    threads: int = 1
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.resample not in ("sorted", "train_only"):
            raise ValueError(f"unknown resample mode {self.resample!r}")
        if self.selection not in ("test", "validation"):
            raise ValueError(f"unknown selection mode {self.selection!r}")
        if self.scaling not in ("train", "full"):
            raise ValueError(f"unknown scaling mode {self.scaling!r}")
        for m in self.models:
            if m not in KINDS:
                raise ValueError(f"unknown model kind {m!r}")
        if self.n_cycles < 1:
            raise ValueError("n_cycles must be positive")

    def to_dict(self) -> dict:
        return {"models": list(self.models), "n_cycles": self.n_cycles, "seed": self.seed,
                "train_fraction": self.train_fraction, "window": self.window,
                "resample": self.resample, "selection": self.selection, "scaling": self.scaling,
                "validation_fraction": self.validation_fraction,
                "hyperparameters": self.hyperparameters}


@dataclass
class CycleResult:
    cycle_index: int
    test_rmse: np.ndarray          # (n_models, n_experiments)
    status: np.ndarray             # same shape, OK / FAILED / SKIPPED
    select_rmse: np.ndarray        # score used to pick representations
    errors: list = field(default_factory=list)


def _fit_score(kind, hp, X_tr, y_tr, X_te, y_te, seed, names):
    model = make_regressor(kind, **hp)
    if len(y_tr) < model.min_rows:
        return np.nan, SKIPPED, None
    try:
        model.fit(X_tr, y_tr, seed=seed, feature_names=names)
        pred = model.predict(X_te)
    except (ConvergenceError, DomainError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return np.nan, FAILED, f"{type(exc).__name__}: {exc}"
    if not np.all(np.isfinite(pred)):
        return np.nan, FAILED, "non-finite predictions"
    return rmse(pred, y_te), OK, None


def _scale(rep, indicators, X, n_fit):
    if not rep.scaled:
        return X
    scaler = fit_scaler(X[:n_fit], columns=~indicators)
    return apply_scaler(scaler, X)


def run_cycle(series: DailySeries, cycle_index: int, config: BenchConfig, blocks=None) -> CycleResult:
    experiments = enumerate_experiments()
    if blocks is None:
        blocks = {e: day_block(series, *e) for e in experiments}
    n = len(series)
    w = config.window
    cseed = mix_seed(config.seed, cycle_index)
    rng = np.random.default_rng(cseed)
    if config.resample == "sorted":
        order = np.sort(rng.integers(0, n, n))
        train_rows = None
    else:
        order = np.arange(n)
        n_train = train_size(n - w, config.train_fraction)
        train_rows = np.sort(rng.integers(0, n_train, n_train))

    shape = (len(config.models), len(experiments))
    test = np.full(shape, np.nan)
    select = np.full(shape, np.nan)
    status = np.zeros(shape, dtype=np.int8)
    errors = []
    for ei, (blend, rep) in enumerate(experiments):
        block = blocks[(blend, rep)]
        X, y, _ = stack_windows(block, order, w)
        n_train = train_size(len(y), config.train_fraction)
        indicators = np.tile(block.indicators, w)
        names = window_feature_names(block.names, w)
        X = _scale(rep, indicators, X, len(y) if config.scaling == "full" else n_train)
        X_tr, y_tr, X_te, y_te = X[:n_train], y[:n_train], X[n_train:], y[n_train:]
        if train_rows is not None:
            X_tr, y_tr = X_tr[train_rows], y_tr[train_rows]
        for mi, kind in enumerate(config.models):
            hp = config.hyperparameters.get(kind, {})
            mseed = mix_seed(mix_seed(cseed, mi), ei)
            score, st, err = _fit_score(kind, hp, X_tr, y_tr, X_te, y_te, mseed, names)
            test[mi, ei], status[mi, ei] = score, st
            if err:
                errors.append({"cycle": cycle_index, "model": kind, "blend": blend.label,
                               "representation": rep.value, "error": err})
            if config.selection == "test":
                select[mi, ei] = score
            elif st == OK:
                n_fit = train_size(len(y_tr), 1 - config.validation_fraction)
                select[mi, ei], _, _ = _fit_score(kind, hp, X_tr[:n_fit], y_tr[:n_fit],
                                                  X_tr[n_fit:], y_tr[n_fit:], mseed, names)
    log.info("cycle %d done (%d failed)", cycle_index, int((status == FAILED).sum()))
    return CycleResult(cycle_index, test, status, select, errors)


def _nanmin(a, axis):
    with np.errstate(all="ignore"):
        all_nan = np.all(np.isnan(a), axis=axis)
        out = np.nanmin(np.where(np.isnan(a), np.inf, a), axis=axis)
    return np.where(all_nan, np.nan, out)


def _summary(x: np.ndarray) -> dict:
    x = x[np.isfinite(x)]
    if len(x) == 0:
        return {"mean": None, "ci95": [None, None], "std": None, "n": 0}
    lo, hi = np.percentile(x, [2.5, 97.5])
    return {"mean": float(x.mean()), "ci95": [float(lo), float(hi)], "std": float(x.std()), "n": int(len(x))}


@dataclass
class ModelReport:
    model: str
    no_additional_rmse: np.ndarray        # per cycle
    any_data_rmse: np.ndarray             # per cycle
    blend_rmse: np.ndarray                # (n_cycles, 8)
    chosen_representation: np.ndarray     # (n_cycles, 8) index into Representation, -1 if none
    best_blend: Blend | None
    best_representation: Representation | None
    group_deltas: dict
    group_delta_cycles: dict

    @property
    def no_additional_ci95(self):
        return _summary(self.no_additional_rmse)["ci95"]

    @property
    def any_data_ci95(self):
        return _summary(self.any_data_rmse)["ci95"]

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "status": "ok",
            "no_additional_data": {**_summary(self.no_additional_rmse),
                                   "cycles": _floats(self.no_additional_rmse)},
            "any_data": {**_summary(self.any_data_rmse), "cycles": _floats(self.any_data_rmse)},
            "best_blend": self.best_blend.label if self.best_blend else None,
            "best_representation": self.best_representation.value if self.best_representation else None,
            "blend_mean_rmse": {b.label: _mean_or_none(self.blend_rmse[:, i]) for i, b in enumerate(ALL_BLENDS)},
            "group_deltas": self.group_deltas,
        }


def _floats(x):
    return [None if not np.isfinite(v) else float(v) for v in x]


def _mean_or_none(x):
    x = x[np.isfinite(x)]
    return float(x.mean()) if len(x) else None


def _group_cycle_deltas(blend_rmse: np.ndarray) -> dict:
    out = {}
    for gi, g in enumerate(GROUPS):
        with_g = [i for i, b in enumerate(ALL_BLENDS) if b[gi]]
        without = [i for i, b in enumerate(ALL_BLENDS) if not b[gi]]
        out[g] = _nanmin(blend_rmse[:, with_g], axis=1) - _nanmin(blend_rmse[:, without], axis=1)
    return out


def _aggregate_model(model: str, mi: int, cycles: list[CycleResult]) -> ModelReport:
    experiments = enumerate_experiments()
    reps = list(Representation)
    n_c = len(cycles)
    blend_rmse = np.full((n_c, len(ALL_BLENDS)), np.nan)
    chosen = np.full((n_c, len(ALL_BLENDS)), -1, dtype=int)
    rep_scores = {}
    for ci, c in enumerate(cycles):
        for bi, blend in enumerate(ALL_BLENDS):
            cols = [ei for ei, (b, _) in enumerate(experiments) if b == blend]
            sel = c.select_rmse[mi, cols]
            if np.all(np.isnan(sel)):
                continue
            k = cols[int(np.nanargmin(sel))]
            blend_rmse[ci, bi] = c.test_rmse[mi, k]
            chosen[ci, bi] = reps.index(experiments[k][1])
        for ei, e in enumerate(experiments):
            rep_scores.setdefault(e, []).append(c.test_rmse[mi, ei])
    no_add = blend_rmse[:, ALL_BLENDS.index(LAG_ONLY)]
    any_data = _nanmin(blend_rmse, axis=1)
    means = np.array([_mean_or_none(blend_rmse[:, i]) or np.inf for i in range(len(ALL_BLENDS))])
    best_blend = best_rep = None
    if np.isfinite(means).any():
        best_blend = ALL_BLENDS[int(np.argmin(means))]
        cand = [(np.nanmean(v) if np.isfinite(v).any() else np.inf, reps.index(r), r)
                for (b, r), v in ((e, np.array(s)) for e, s in rep_scores.items()) if b == best_blend]
        best_rep = min(cand)[2]
    per_cycle = _group_cycle_deltas(blend_rmse)
    deltas = {g: _mean_or_none(v) for g, v in per_cycle.items()}
    return ModelReport(model, no_add, any_data, blend_rmse, chosen, best_blend, best_rep, deltas, per_cycle)


@dataclass
class BenchmarkReport:
    config: BenchConfig
    n_rows: int
    models: dict                      # kind -> ModelReport
    counts: dict
    errors: list
    cycles: list = field(repr=False, default_factory=list)

    @property
    def group_deltas(self) -> dict:
        return group_improvement(self)

    def to_dict(self) -> dict:
        experiments = enumerate_experiments()
        return {
            "config": self.config.to_dict(),
            "series_rows": self.n_rows,
            "n_experiments": len(experiments),
            "experiments": [{"blend": b.label, "representation": r.value} for b, r in experiments],
            "note": "28 deduplicated blend/representation pairs; a 27-experiment count omits one of them",
            "models": {k: m.to_dict() for k, m in self.models.items()},
            "not_implemented": {k: {"status": "not_implemented"} for k in NOT_IMPLEMENTED},
            "group_deltas": group_improvement(self),
            "counts": self.counts,
            "errors": self.errors,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False)

    def write_performance_csv(self, path) -> None:
        """Per-model bars with confidence intervals (one row per architecture)."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", "status", "no_additional_mean", "no_additional_ci_low",
                        "no_additional_ci_high", "any_data_mean", "any_data_ci_low", "any_data_ci_high",
                        "best_blend", "best_representation"])
            for k, m in self.models.items():
                a, b = _summary(m.no_additional_rmse), _summary(m.any_data_rmse)
                w.writerow([k, "ok", _fmt(a["mean"]), _fmt(a["ci95"][0]), _fmt(a["ci95"][1]),
                            _fmt(b["mean"]), _fmt(b["ci95"][0]), _fmt(b["ci95"][1]),
                            m.best_blend.label if m.best_blend else "",
                            m.best_representation.value if m.best_representation else ""])
            for k in NOT_IMPLEMENTED:
                w.writerow([k, "not_implemented", "", "", "", "", "", "", "", ""])

    def write_group_csv(self, path) -> None:
        """Mean RMSE change from adding each covariate group (negative = improvement)."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", "group", "mean_delta_rmse"])
            for k, m in self.models.items():
                for g in GROUPS:
                    w.writerow([k, g, _fmt(m.group_deltas[g])])
            for g, v in group_improvement(self).items():
                w.writerow(["all", g, _fmt(v)])


def _fmt(v):
    return "" if v is None else repr(float(v))


def group_improvement(report: BenchmarkReport) -> dict:
    """Mean over cycles and models of best-with-group minus best-without-group RMSE."""
    out = {}
    for g in GROUPS:
        vals = np.concatenate([m.group_delta_cycles[g] for m in report.models.values()])
        out[g] = _mean_or_none(vals)
    return out


def bootstrap_benchmark(series: DailySeries, models=KINDS, n_cycles: int = 100, seed: int = 0,
                        progress=None, **options) -> BenchmarkReport:
    """Run the bootstrap protocol and aggregate a :class:`BenchmarkReport`.

    ``options`` are forwarded to :class:`BenchConfig`.  Results do not
    depend on ``threads``.
    """
    config = BenchConfig(models=tuple(models), n_cycles=n_cycles, seed=seed, **options)
    if len(series) <= config.window + 1:
        raise ValueError("series too short for windowing and splitting")
    train_size(len(series) - config.window, config.train_fraction)
    experiments = enumerate_experiments()
    blocks = {e: day_block(series, *e) for e in experiments}

    def one(c):
        res = run_cycle(series, c, config, blocks)
        if progress is not None:
            progress(c, config.n_cycles)
        return res

    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            cycles = list(pool.map(one, range(config.n_cycles)))
    else:
        cycles = [one(c) for c in range(config.n_cycles)]
    cycles.sort(key=lambda c: c.cycle_index)

    status = np.stack([c.status for c in cycles])
    counts = {"completed": int((status == OK).sum()), "failed": int((status == FAILED).sum()),
              "skipped": int((status == SKIPPED).sum()),
              "total": int(status.size)}
    reports = {m: _aggregate_model(m, i, cycles) for i, m in enumerate(config.models)}
    errors = [e for c in cycles for e in c.errors]
    return BenchmarkReport(config, len(series), reports, counts, errors, cycles)


def permutation_importance(model, X_test, y_test, n_repeats: int = 10, seed: int = 0,
                           feature_names=None) -> list[tuple[str, float]]:
    """Mean RMSE increase when each column is shuffled, sorted descending."""
    if n_repeats < 1:
        raise ValueError("n_repeats must be at least 1")
    X_test = np.asarray(X_test, dtype=float)
    y_test = np.asarray(y_test, dtype=float)
    base = rmse(model.predict(X_test), y_test)
    names = feature_names or [f"x{j}" for j in range(X_test.shape[1])]
    scores = []
    for j in range(X_test.shape[1]):
        rng = np.random.default_rng(mix_seed(seed, j))
        deltas = []
        for _ in range(n_repeats):
            Xp = X_test.copy()
            Xp[:, j] = Xp[rng.permutation(len(Xp)), j]
            deltas.append(rmse(model.predict(Xp), y_test) - base)
        scores.append((names[j], float(np.mean(deltas))))
    order = sorted(range(len(scores)), key=lambda j: (-scores[j][1], j))
    return [scores[j] for j in order]


def fit_on_split(series: DailySeries, kind: str, blend: Blend = LAG_ONLY,
                 representation: Representation | str = Representation.RAW, train_fraction: float = 0.8,
                 window: int = DEFAULT_WINDOW, seed: int = 0, **hyperparameters):
    """Fit one model on the chronological training rows of the contiguous series.

    Returns ``(model, train, test)``.
    """
    from .features import build_windows

    ds = build_windows(series, blend, representation, window,
                       scale_fit_rows=train_size(len(series) - window, train_fraction))
    train, test = chrono_split(ds, train_fraction)
    model = make_regressor(kind, **hyperparameters).fit(train.X, train.y, seed=seed,
                                                        feature_names=ds.feature_names)
    return model, train, test
