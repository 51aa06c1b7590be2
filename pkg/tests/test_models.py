import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize
from scipy.special import gammaln

from delaycast.models import (KINDS, NOT_IMPLEMENTED, ConvergenceError, DomainError, NotFittedError,
                              PoissonRegression, Tree, default_hyperparameters, from_json, make_regressor)
from oracles import normal_equations


def _problem(rng, n=60, p=4):
    X = rng.normal(size=(n, p))
    y = 3.0 + X @ rng.normal(size=p) + rng.normal(0, 0.5, n)
    return X, y


def test_kinds_and_placeholders():
    assert set(KINDS) == {"moving_average", "linear", "ridge", "lasso", "poisson", "knn", "random_forest",
                          "gradient_boosting"}
    assert NOT_IMPLEMENTED == ("svr", "mlp")


def test_documented_defaults():
    assert default_hyperparameters("random_forest")["n_trees"] == 100
    assert default_hyperparameters("knn") == {"k": 5}
    gb = default_hyperparameters("gradient_boosting")
    assert (gb["learning_rate"], gb["max_depth"], gb["n_trees"]) == (0.1, 3, 100)
    assert default_hyperparameters("ridge") == {"lam": 1.0}
    lasso = default_hyperparameters("lasso")
    assert (lasso["lam"], lasso["tol"], lasso["max_sweeps"]) == (0.1, 1e-6, 10_000)
    pois = default_hyperparameters("poisson")
    assert (pois["max_iter"], pois["max_halvings"]) == (100, 10)
    with pytest.raises(ValueError):
        default_hyperparameters("svr")
    with pytest.raises(ValueError):
        make_regressor("ridge", alpha=3)


@pytest.mark.parametrize("kind", KINDS)
def test_unfitted_and_shape_errors(kind, rng):
    m = make_regressor(kind)
    with pytest.raises(NotFittedError):
        m.predict(np.zeros((1, 3)))
    X, y = _problem(rng)
    m.fit(X, np.abs(y), seed=1)
    with pytest.raises(ValueError):
        m.predict(np.zeros((2, 5)))
    with pytest.raises(ValueError):
        make_regressor(kind).fit(X, y[:-1])


def test_ols_matches_normal_equations():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        X, y = _problem(rng, n=int(rng.integers(10, 80)), p=int(rng.integers(1, 6)))
        m = make_regressor("linear").fit(X, y)
        b0, b = normal_equations(X, y)
        np.testing.assert_allclose(m.coef_, b, rtol=1e-8, atol=1e-10)
        assert m.intercept_ == pytest.approx(b0, rel=1e-8, abs=1e-10)


def test_ols_collinear_minimum_norm(rng):
    x = rng.normal(size=(30, 1))
    X = np.hstack([x, x])
    y = 2 * x[:, 0] + 1
    m = make_regressor("linear").fit(X, y)
    np.testing.assert_allclose(m.coef_, [1.0, 1.0], atol=1e-10)
    np.testing.assert_allclose(m.predict(X), y, atol=1e-10)


def test_ridge_zero_limit_equals_ols(rng):
    X, y = _problem(rng)
    ridge = make_regressor("ridge", lam=1e-10).fit(X, y)
    np.testing.assert_allclose(ridge.coef_, normal_equations(X, y)[1], rtol=1e-6)


def test_ridge_is_unique_minimizer(rng):
    X, y = _problem(rng)
    m = make_regressor("ridge", lam=5.0).fit(X, y)
    base = m.objective(X, y)
    for j in range(X.shape[1]):
        for d in (-1e-3, 1e-3):
            c = m.coef_.copy()
            c[j] += d
            assert m.objective(X, y, coef=c) > base
    assert m.objective(X, y, intercept=m.intercept_ + 1e-3) > base


def test_ridge_intercept_unpenalized(rng):
    X, y = _problem(rng)
    m = make_regressor("ridge", lam=1e6).fit(X, y + 1000)
    assert m.intercept_ == pytest.approx(np.mean(y + 1000), rel=1e-3)


def _lasso_threshold(X, y):
    Z = (X - X.mean(axis=0)) / X.std(axis=0)
    return np.max(np.abs(Z.T @ (y - y.mean()))) / len(y)


def test_lasso_full_shrinkage(rng):
    X, y = _problem(rng)
    lam = _lasso_threshold(X, y)
    m = make_regressor("lasso", lam=lam * (1 + 1e-12)).fit(X, y)
    assert np.all(m.coef_ == 0.0)
    assert m.intercept_ == pytest.approx(y.mean())
    below = make_regressor("lasso", lam=lam * 0.99).fit(X, y)
    assert np.count_nonzero(below.coef_) == 1


def test_lasso_small_penalty_near_ols(rng):
    X, y = _problem(rng, n=200)
    m = make_regressor("lasso", lam=1e-9, tol=1e-12).fit(X, y)
    np.testing.assert_allclose(m.coef_, normal_equations(X, y)[1], rtol=1e-5)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.floats(1e-3, 2.0))
def test_lasso_objective_non_increasing(seed, lam):
    X, y = _problem(np.random.default_rng(seed), n=40, p=6)
    h = make_regressor("lasso", lam=lam).fit(X, y).objective_history_
    assert np.all(np.diff(h) <= 1e-12 * np.abs(h[:-1]) + 1e-15)


def test_lasso_constant_column(rng):
    X, y = _problem(rng)
    X[:, 1] = 4.0
    m = make_regressor("lasso").fit(X, y)
    assert m.coef_[1] == 0.0 and np.all(np.isfinite(m.predict(X)))


def _poisson_oracle(X, y):
    A = np.column_stack([np.ones(len(y)), X])
    nll = lambda b: -np.sum(y * (A @ b) - np.exp(A @ b) - gammaln(y + 1))
    grad = lambda b: -A.T @ (y - np.exp(A @ b))
    return minimize(nll, np.zeros(A.shape[1]), jac=grad, method="BFGS", options={"gtol": 1e-10}).x


def test_poisson_matches_direct_optimization(rng):
    X = rng.normal(size=(300, 3))
    y = rng.poisson(np.exp(1.0 + X @ [0.3, -0.2, 0.1])).astype(float)
    m = make_regressor("poisson").fit(X, y)
    b = _poisson_oracle(X, y)
    assert m.intercept_ == pytest.approx(b[0], abs=1e-5)
    np.testing.assert_allclose(m.coef_, b[1:], atol=1e-5)
    np.testing.assert_allclose(m.predict(X[:3]), np.exp(m.intercept_ + X[:3] @ m.coef_))


def test_poisson_loglik_monotone_on_random_problems():
    for seed in range(50):
        rng = np.random.default_rng(seed)
        n, p = int(rng.integers(20, 200)), int(rng.integers(1, 6))
        X = rng.normal(size=(n, p))
        y = rng.poisson(np.exp(rng.normal(1, 0.5) + X @ rng.normal(0, 0.4, p))).astype(float)
        h = make_regressor("poisson").fit(X, y).loglik_history_
        assert np.all(np.diff(h) >= 0)


def test_poisson_rounds_and_rejects_negative(rng):
    X = rng.normal(size=(50, 2))
    y = rng.poisson(3, 50).astype(float)
    a = make_regressor("poisson").fit(X, y)
    b = make_regressor("poisson").fit(X, y + 0.2)
    np.testing.assert_array_equal(a.coef_, b.coef_)
    with pytest.raises(DomainError):
        make_regressor("poisson").fit(X, y - 10)


def test_poisson_halving_failure_raises():
    # an outlying count makes the undamped first IRLS step overshoot
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 2)) * 10
    y = rng.poisson(3, 30).astype(float)
    y[4] = 1000
    with pytest.raises(ConvergenceError):
        PoissonRegression(max_halvings=0).fit(X, y)
    assert PoissonRegression().fit(X, y).converged_


def test_knn_self_retrieval(rng):
    X, y = _problem(rng)
    np.testing.assert_array_equal(make_regressor("knn", k=1).fit(X, y).predict(X), y)


def test_knn_matches_brute_force(rng):
    X, y = _problem(rng, n=80)
    Q = rng.normal(size=(20, X.shape[1]))
    got = make_regressor("knn", k=5).fit(X, y).predict(Q)
    for q, g in zip(Q, got):
        d = np.linalg.norm(X - q, axis=1)
        idx = sorted(range(len(d)), key=lambda i: (d[i], i))[:5]
        assert g == pytest.approx(y[idx].mean())


def test_knn_ties_use_lowest_index():
    X = np.array([[1.0], [-1.0], [1.0], [5.0]])
    y = np.array([10.0, 20.0, 30.0, 40.0])
    assert make_regressor("knn", k=1).fit(X, y).predict([[0.0]])[0] == 10.0
    assert make_regressor("knn", k=2).fit(X, y).predict([[0.0]])[0] == 15.0


def test_moving_average_uses_lag_columns():
    names = ["target_lag2", "dow_lag2", "target_lag1", "dow_lag1"]
    X = np.array([[4.0, 100.0, 6.0, 200.0]])
    m = make_regressor("moving_average").fit(X, [0.0], feature_names=names)
    assert m.predict(X)[0] == 5.0
    const = np.full((3, 5), 7.25)
    assert np.all(make_regressor("moving_average").fit(const, np.zeros(3)).predict(const) == 7.25)


@pytest.mark.parametrize("kind", ["random_forest", "gradient_boosting"])
def test_ensembles_beat_mean_on_sine(kind):
    rng = np.random.default_rng(0)
    X = rng.uniform(-3, 3, size=(250, 2))
    y = np.sin(X[:, 0]) + rng.normal(0, 0.2, 250)
    tr, te = slice(0, 200), slice(200, 250)
    pred = make_regressor(kind).fit(X[tr], y[tr], seed=1).predict(X[te])
    rmse = np.sqrt(np.mean((pred - y[te]) ** 2))
    base = np.sqrt(np.mean((y[tr].mean() - y[te]) ** 2))
    assert rmse < 0.5 * base


def test_tree_fits_training_data_exactly(rng):
    X = rng.normal(size=(50, 3))
    y = rng.normal(size=50)
    t = Tree.grow(X, y)
    np.testing.assert_array_equal(t.predict(X), y)


def test_tree_split_tie_break():
    # both features separate the targets equally well; the lower index wins
    X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
    t = Tree.grow(X, np.array([0.0, 0.0, 1.0, 1.0]))
    assert t.to_nested()["feature"] == 0


def test_tree_split_is_variance_optimal(rng):
    X = rng.normal(size=(40, 2))
    y = np.where(X[:, 1] > 0.3, 5.0, 0.0) + rng.normal(0, 0.01, 40)
    root = Tree.grow(X, y, max_depth=1).to_nested()
    assert root["feature"] == 1
    sse = []
    for j in range(2):
        for thr in np.unique(X[:, j])[:-1]:
            left = X[:, j] <= thr
            sse.append((((y[left] - y[left].mean()) ** 2).sum() + ((y[~left] - y[~left].mean()) ** 2).sum(), j, thr))
    best = min(sse)
    left = X[:, 1] <= root["threshold"]
    got = ((y[left] - y[left].mean()) ** 2).sum() + ((y[~left] - y[~left].mean()) ** 2).sum()
    assert got == pytest.approx(best[0], rel=1e-12)


@pytest.mark.parametrize("kind", ["random_forest", "gradient_boosting"])
def test_ensembles_deterministic(kind, rng):
    X, y = _problem(rng, n=120)
    a = make_regressor(kind, n_trees=20).fit(X, y, seed=3).predict(X)
    b = make_regressor(kind, n_trees=20).fit(X, y, seed=3).predict(X)
    np.testing.assert_array_equal(a, b)


def test_forest_threads_bitwise_equal(rng):
    X, y = _problem(rng, n=120)
    a = make_regressor("random_forest", n_trees=30).fit(X, y, seed=3)
    b = make_regressor("random_forest", n_trees=30, threads=4).fit(X, y, seed=3)
    np.testing.assert_array_equal(a.predict(X), b.predict(X))
    assert a.to_json().replace('"threads": 1', "") == b.to_json().replace('"threads": 4', "")


@pytest.mark.parametrize("kind", [k for k in KINDS if k != "knn"])
def test_row_order_invariance(kind, rng):
    X, y = _problem(rng, n=80)
    y = np.abs(y)
    perm = rng.permutation(80)
    kw = {"n_trees": 10} if kind in ("random_forest", "gradient_boosting") else {}
    a = make_regressor(kind, **kw).fit(X, y, seed=2).predict(X)
    b = make_regressor(kind, **kw).fit(X[perm], y[perm], seed=2).predict(X)
    np.testing.assert_allclose(a, b, rtol=1e-8, atol=1e-8)


@pytest.mark.parametrize("kind", KINDS)
def test_json_round_trip_exact(kind, rng):
    X, y = _problem(rng, n=70)
    y = np.abs(y)
    kw = {"n_trees": 15} if kind in ("random_forest", "gradient_boosting") else {}
    m = make_regressor(kind, **kw).fit(X, y, seed=5)
    text = m.to_json()
    back = from_json(text)
    np.testing.assert_array_equal(back.predict(X), m.predict(X))
    d = json.loads(text)
    assert d["format"] == "delaycast-model" and d["version"] == 1 and d["kind"] == kind
    assert back.to_json() == text


def test_json_rejects_other_formats():
    with pytest.raises(ValueError):
        from_json('{"format": "other"}')
