"""Regression model zoo behind one fit/predict contract."""
from __future__ import annotations

import copy
import json

from .base import (FORMAT_NAME, FORMAT_VERSION, ConvergenceError, DomainError, NotFittedError,
                   Regressor)
from .glm import PoissonRegression
from .linear import Lasso, LinearRegression, Ridge
from .neighbors import KNeighbors, MovingAverage
from .trees import DecisionTree, GradientBoosting, RandomForest, Tree

REGISTRY = {
    cls.kind: cls
    for cls in (MovingAverage, LinearRegression, Ridge, Lasso, PoissonRegression, KNeighbors,
                RandomForest, GradientBoosting)
}
KINDS = tuple(REGISTRY)

# Architectures of the ten-model comparison that this package does not provide.
NOT_IMPLEMENTED = ("svr", "mlp")


def default_hyperparameters(kind: str) -> dict:
    try:
        return copy.deepcopy(REGISTRY[kind].defaults)
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; choose from {', '.join(KINDS)}") from None


def make_regressor(kind: str, **hyperparameters) -> Regressor:
    if kind not in REGISTRY:
        raise ValueError(f"unknown model kind {kind!r}; choose from {', '.join(KINDS)}")
    return REGISTRY[kind](**hyperparameters)


def from_dict(d: dict) -> Regressor:
    if d.get("format") != FORMAT_NAME:
        raise ValueError("not a serialized model")
    if d.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {d.get('version')}")
    kinds = {**REGISTRY, DecisionTree.kind: DecisionTree}
    model = kinds[d["kind"]](**d["hyperparameters"])
    model.n_features_ = int(d["n_features"])
    model._load_state(d["state"])
    return model


def from_json(text: str) -> Regressor:
    return from_dict(json.loads(text))


__all__ = [
    "ConvergenceError", "DecisionTree", "DomainError", "GradientBoosting", "KINDS", "KNeighbors",
    "Lasso", "LinearRegression", "MovingAverage", "NOT_IMPLEMENTED", "NotFittedError",
    "PoissonRegression", "REGISTRY", "RandomForest", "Regressor", "Ridge", "Tree",
    "default_hyperparameters", "from_dict", "from_json", "make_regressor",
]
