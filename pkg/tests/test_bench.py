import csv
import json
import math

import numpy as np
import pytest

from delaycast.bench import (FAILED, GROUPS, OK, BenchConfig, _group_cycle_deltas, bootstrap_benchmark,
                             chrono_split, fit_on_split, permutation_importance, rmse, train_size)
from delaycast.data import synth_daily
from delaycast.features import ALL_BLENDS, Blend, build_windows, enumerate_experiments
from delaycast.models import make_regressor


@pytest.fixture(scope="module")
def small_report():
    s = synth_daily(60, 30, 5, 0.5, 4, seed=2)
    return bootstrap_benchmark(s, models=("moving_average", "linear", "ridge", "knn"), n_cycles=3, seed=9)


@pytest.mark.parametrize("rows, train", [(1666, 1333), (4194, 3355), (10, 8), (5, 4)])
def test_train_size(rows, train):
    assert train_size(rows) == train


def test_train_size_halves_round_up():
    assert train_size(10, 0.25) == 3
    assert train_size(10, 0.35) == 4


def test_train_size_empty_side():
    with pytest.raises(ValueError):
        train_size(2, 0.1)
    with pytest.raises(ValueError):
        train_size(10, 1.0)


def test_chrono_split_preserves_order():
    d = build_windows(synth_daily(20, seed=1))
    tr, te = chrono_split(d)
    assert (len(tr), len(te)) == (12, 3)
    assert tr.row_dates[-1] < te.row_dates[0]
    np.testing.assert_array_equal(np.vstack([tr.X, te.X]), d.X)


def test_rmse_examples(rng):
    assert rmse([0, 0], [3, 4]) == pytest.approx(math.sqrt(12.5))
    assert rmse([1.5, 2], [1.5, 2]) == 0.0
    a, b = rng.normal(size=30), rng.normal(size=30)
    p = rng.permutation(30)
    assert rmse(a[p], b[p]) == pytest.approx(rmse(a, b), rel=1e-15)
    with pytest.raises(ValueError):
        rmse([1], [1, 2])
    with pytest.raises(ValueError):
        rmse([], [])


def test_config_validation():
    with pytest.raises(ValueError):
        BenchConfig(models=("svr",))
    with pytest.raises(ValueError):
        BenchConfig(resample="shuffle")
    with pytest.raises(ValueError):
        BenchConfig(n_cycles=0)


def test_any_data_never_worse(small_report):
    for m in small_report.models.values():
        assert np.all(m.any_data_rmse <= m.no_additional_rmse)


def test_counts_add_up(small_report):
    c = small_report.counts
    assert c["completed"] + c["failed"] + c["skipped"] == c["total"] == 3 * 4 * len(enumerate_experiments())


def test_ci_brackets_mean(small_report):
    d = json.loads(small_report.to_json())
    for m in d["models"].values():
        for key in ("no_additional_data", "any_data"):
            s = m[key]
            assert s["ci95"][0] <= s["mean"] <= s["ci95"][1]


def test_report_json_contents(small_report):
    d = json.loads(small_report.to_json())
    assert d["n_experiments"] == 28 and "27" in d["note"]
    assert d["not_implemented"] == {"mlp": {"status": "not_implemented"}, "svr": {"status": "not_implemented"}}
    assert set(d["group_deltas"]) == set(GROUPS)
    assert d["config"]["seed"] == 9


def test_report_deterministic(small_report):
    s = synth_daily(60, 30, 5, 0.5, 4, seed=2)
    again = bootstrap_benchmark(s, models=("moving_average", "linear", "ridge", "knn"), n_cycles=3, seed=9)
    assert again.to_json() == small_report.to_json()


def test_threads_do_not_change_report():
    s = synth_daily(50, 30, 5, 0.5, 4, seed=3)
    a = bootstrap_benchmark(s, models=("linear", "random_forest"), n_cycles=3, seed=1,
                            hyperparameters={"random_forest": {"n_trees": 5}})
    b = bootstrap_benchmark(s, models=("linear", "random_forest"), n_cycles=3, seed=1, threads=3,
                            hyperparameters={"random_forest": {"n_trees": 5}})
    da, db = json.loads(a.to_json()), json.loads(b.to_json())
    assert da["config"].pop("threads", None) == db["config"].pop("threads", None)
    assert da == db


def test_single_cycle_run_twice():
    s = synth_daily(40, 30, 0, 0, 3, seed=4)
    a = bootstrap_benchmark(s, models=("linear",), n_cycles=1, seed=5)
    b = bootstrap_benchmark(s, models=("linear",), n_cycles=1, seed=5)
    assert a.to_json() == b.to_json()


def test_group_deltas_zero_when_all_equal():
    deltas = _group_cycle_deltas(np.full((4, len(ALL_BLENDS)), 3.5))
    for g in GROUPS:
        np.testing.assert_array_equal(deltas[g], 0.0)


def test_group_delta_definition(small_report):
    m = small_report.models["linear"]
    b = m.blend_rmse
    with_w = [i for i, bl in enumerate(ALL_BLENDS) if bl.use_weather]
    without = [i for i, bl in enumerate(ALL_BLENDS) if not bl.use_weather]
    np.testing.assert_allclose(m.group_delta_cycles["weather"], b[:, with_w].min(1) - b[:, without].min(1))


def test_failures_are_counted():
    s = synth_daily(40, 30, 0, 0, 3, seed=4)
    r = bootstrap_benchmark(s, models=("poisson",), n_cycles=1, seed=0,
                            hyperparameters={"poisson": {"max_halvings": 0, "max_iter": 1}})
    assert r.counts["completed"] + r.counts["failed"] + r.counts["skipped"] == r.counts["total"]
    status = r.cycles[0].status
    assert set(np.unique(status)) <= {OK, FAILED}
    assert r.counts["failed"] == len(r.errors)


def test_train_only_and_validation_modes_run():
    s = synth_daily(50, 30, 0, 0, 3, seed=4)
    r = bootstrap_benchmark(s, models=("linear",), n_cycles=2, seed=0, resample="train_only",
                            selection="validation", scaling="full")
    assert np.all(np.isfinite(r.models["linear"].any_data_rmse))


def test_csv_outputs(small_report, tmp_path):
    small_report.write_performance_csv(tmp_path / "p.csv")
    small_report.write_group_csv(tmp_path / "g.csv")
    rows = list(csv.DictReader(open(tmp_path / "p.csv")))
    assert [r["model"] for r in rows] == ["moving_average", "linear", "ridge", "knn", "svr", "mlp"]
    assert rows[-1]["status"] == "not_implemented"
    groups = list(csv.DictReader(open(tmp_path / "g.csv")))
    assert len(groups) == 4 * 3 + 3


def test_importance_ranks_signal_first(rng):
    X = rng.normal(size=(300, 4))
    y = 10 * X[:, 0] + rng.normal(0, 0.5, 300)
    m = make_regressor("linear").fit(X, y)
    ranked = permutation_importance(m, X, y, n_repeats=5, seed=1, feature_names=list("abcd"))
    assert ranked[0][0] == "a" and ranked[0][1] > 5


def test_importance_zero_for_ignored_column():
    s = synth_daily(60, 30, 0, 1, 3, seed=1)
    model, _, test = fit_on_split(s, "moving_average", Blend(False, False, True))
    ranked = dict(permutation_importance(model, test.X, test.y, n_repeats=3, feature_names=test.feature_names))
    for name, v in ranked.items():
        if not name.startswith("target_lag"):
            assert v == 0.0


def test_importance_deterministic_and_validated(rng):
    X = rng.normal(size=(50, 3))
    y = X[:, 1]
    m = make_regressor("ridge").fit(X, y)
    assert permutation_importance(m, X, y, seed=4) == permutation_importance(m, X, y, seed=4)
    with pytest.raises(ValueError):
        permutation_importance(m, X, y, n_repeats=0)


def test_lagged_target_most_important_for_forest():
    # a slow seasonal level gives yesterday's count information the calendar lacks;
    # on a purely periodic series the weekday columns rank first instead
    s = synth_daily(400, 20, 60, 0, 5, seed=5)
    model, _, test = fit_on_split(s, "random_forest", Blend(True, True, True), seed=1)
    ranked = permutation_importance(model, test.X, test.y, n_repeats=5, seed=2,
                                    feature_names=test.feature_names)
    assert ranked[0][0].startswith("target_lag")


@pytest.mark.slow
def test_weekly_signal_helps_in_nearly_every_cycle():
    # linear needs a longer series before the one-hot weekday columns pay for themselves
    runs = [(synth_daily(600, 50, 0, 0, 10, seed=1), "linear", {}),
            (synth_daily(300, 50, 0, 0, 10, seed=1), "random_forest", {"random_forest": {"n_trees": 25}})]
    for series, kind, hp in runs:
        r = bootstrap_benchmark(series, models=(kind,), n_cycles=100, seed=0, hyperparameters=hp)
        b = r.models[kind].blend_rmse
        wins = int((b[:, ALL_BLENDS.index(Blend(True, False, False))] < b[:, 0]).sum())
        assert wins >= 95, (kind, wins)
        assert r.models[kind].group_deltas["dow"] < 0
