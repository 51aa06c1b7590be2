from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from ..features import lag_target_columns
from .base import Regressor


class KNeighbors(Regressor):
    """Mean target of the ``k`` nearest training rows (Euclidean).

    Equal distances are resolved in favour of the lower training-row index,
    so predictions depend on training-row order when ties occur.
    """

    kind = "knn"
    defaults = {"k": 5}

    def _fit(self, X, y, seed, feature_names):
        self.X_ = X.copy()
        self.y_ = y.copy()

    def _predict(self, X):
        k = min(int(self.hyperparameters["k"]), len(self.y_))
        out = np.empty(X.shape[0])
        for start in range(0, X.shape[0], 256):
            d = cdist(X[start:start + 256], self.X_, "sqeuclidean")
            nearest = np.argsort(d, axis=1, kind="stable")[:, :k]
            out[start:start + 256] = self.y_[nearest].mean(axis=1)
        return out

    def _state(self):
        return {"X": self.X_.tolist(), "y": self.y_.tolist()}

    def _load_state(self, state):
        self.X_ = np.array(state["X"], dtype=float).reshape(-1, self.n_features_)
        self.y_ = np.array(state["y"], dtype=float)


class MovingAverage(Regressor):
    """Predicts the mean of the lagged-target columns; ignores everything else.

    The lag columns are found from ``feature_names`` (``target_lag*``); when
    no names are given every column is treated as a lag.
    """

    kind = "moving_average"
    defaults = {}

    def _fit(self, X, y, seed, feature_names):
        if feature_names is None:
            self.columns_ = np.arange(X.shape[1])
        else:
            self.columns_ = lag_target_columns(feature_names)
            if len(self.columns_) == 0:
                raise ValueError("no target_lag columns among feature names")

    def _predict(self, X):
        return X[:, self.columns_].mean(axis=1)

    def _state(self):
        return {"columns": self.columns_.tolist()}

    def _load_state(self, state):
        self.columns_ = np.array(state["columns"], dtype=int)
