from __future__ import annotations

import json

import numpy as np

FORMAT_NAME = "delaycast-model"
FORMAT_VERSION = 1


class NotFittedError(RuntimeError):
    pass


class DomainError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


def _as_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2:
        raise ValueError("X must be 2-d")
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    return X, y


class Regressor:
    """Common fit/predict surface.

    Subclasses set ``kind`` and ``defaults`` and implement ``_fit``,
    ``_predict``, ``_state`` and ``_load_state``.
    """

    kind: str = ""
    defaults: dict = {}
    min_rows: int = 1

    def __init__(self, **hyperparameters):
        unknown = set(hyperparameters) - set(self.defaults)
        if unknown:
            raise ValueError(f"unknown hyperparameter(s) for {self.kind}: {sorted(unknown)}")
        self.hyperparameters = {**self.defaults, **hyperparameters}
        self.n_features_ = None

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.hyperparameters.items())
        return f"{type(self).__name__}({args})"

    @property
    def is_fitted(self) -> bool:
        return self.n_features_ is not None

    def fit(self, X, y, seed: int = 0, feature_names=None):
        X, y = _as_xy(X, y)
        if X.shape[0] < self.min_rows:
            raise ValueError(f"{self.kind} needs at least {self.min_rows} rows")
        self._fit(X, y, int(seed), feature_names)
        self.n_features_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        if not self.is_fitted:
            raise NotFittedError(f"{self.kind} model is not fitted")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_:
            raise ValueError(f"expected {self.n_features_} columns, got shape {X.shape}")
        return self._predict(X)

    # serialization
    def to_dict(self) -> dict:
        if not self.is_fitted:
            raise NotFittedError("cannot serialize an unfitted model")
        return {"format": FORMAT_NAME, "version": FORMAT_VERSION, "kind": self.kind,
                "hyperparameters": self.hyperparameters, "n_features": self.n_features_,
                "state": self._state()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def _fit(self, X, y, seed, feature_names):
        raise NotImplementedError

    def _predict(self, X):
        raise NotImplementedError

    def _state(self) -> dict:
        raise NotImplementedError

    def _load_state(self, state: dict):
        raise NotImplementedError
