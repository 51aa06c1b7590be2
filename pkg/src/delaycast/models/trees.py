"""CART regression trees, random forests and gradient boosting.

Splits maximize the reduction in squared error.  Candidate thresholds are
midpoints between consecutive distinct values; ties between equally good
splits go to the lowest feature index, then the lowest threshold.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numba import njit

from ..simulate import mix_seed
from .base import Regressor

LEAF = -1


@njit(cache=True, nogil=True)
def _splitmix(state):
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def _best_split(X, y, idx, start, end, feats, n_feats, min_leaf):
    m = end - start
    best_gain = 0.0
    best_f = -1
    best_t = 0.0
    total = 0.0
    for i in range(start, end):
        total += y[idx[i]]
    base = total * total / m
    xs = np.empty(m)
    ys = np.empty(m)
    for fi in range(n_feats):
        f = feats[fi]
        for i in range(m):
            xs[i] = X[idx[start + i], f]
        order = np.argsort(xs, kind="mergesort")
        for i in range(m):
            ys[i] = y[idx[start + order[i]]]
        left = 0.0
        for i in range(1, m):
            left += ys[i - 1]
            if i < min_leaf or m - i < min_leaf:
                continue
            a = xs[order[i - 1]]
            b = xs[order[i]]
            if not a < b:
                continue
            right = total - left
            gain = left * left / i + right * right / (m - i) - base
            if gain > best_gain * (1.0 + 1e-12) and gain > 1e-12 * abs(base):
                best_gain = gain
                best_f = f
                t = 0.5 * (a + b)
                best_t = a if t >= b else t
    return best_f, best_t, best_gain


@njit(cache=True, nogil=True)
def _build_tree(X, y, max_depth, min_leaf, max_features, seed):
    n, p = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    idx = np.arange(n)
    state = np.array([np.uint64(seed)], dtype=np.uint64)
    perm = np.arange(p)
    feats = np.empty(p, dtype=np.int64)

    # stack of (node, start, end, depth)
    stack = np.empty((cap, 4), dtype=np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        m = end - start
        s = 0.0
        lo = y[idx[start]]
        hi = lo
        for i in range(start, end):
            v = y[idx[i]]
            s += v
            if v < lo:
                lo = v
            if v > hi:
                hi = v
        value[node] = s / m
        if m < 2 * min_leaf or lo == hi or (max_depth >= 0 and depth >= max_depth):
            continue

        # candidate features: first `max_features` non-constant ones of a random permutation
        n_feats = 0
        if max_features >= p:
            for f in range(p):
                feats[n_feats] = f
                n_feats += 1
        else:
            for i in range(p - 1, 0, -1):
                j = np.int64(_splitmix(state) % np.uint64(i + 1))
                tmp = perm[i]
                perm[i] = perm[j]
                perm[j] = tmp
            for k in range(p):
                f = perm[k]
                first = X[idx[start], f]
                varies = False
                for i in range(start + 1, end):
                    if X[idx[i], f] != first:
                        varies = True
                        break
                if varies:
                    feats[n_feats] = f
                    n_feats += 1
                    if n_feats == max_features:
                        break
            feats[:n_feats] = np.sort(feats[:n_feats])
        if n_feats == 0:
            continue
        f, t, gain = _best_split(X, y, idx, start, end, feats, n_feats, min_leaf)
        if f < 0:
            continue

        # partition idx[start:end] on X[:, f] <= t, keeping relative order
        seg = idx[start:end].copy()
        k = start
        for i in range(m):
            if X[seg[i], f] <= t:
                idx[k] = seg[i]
                k += 1
        mid = k
        for i in range(m):
            if X[seg[i], f] > t:
                idx[k] = seg[i]
                k += 1
        feature[node] = f
        threshold[node] = t
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack[top, 0] = n_nodes + 1
        stack[top, 1] = mid
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = n_nodes
        stack[top, 1] = start
        stack[top, 2] = mid
        stack[top, 3] = depth + 1
        top += 1
        n_nodes += 2
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


@njit(cache=True, nogil=True)
def _predict_tree(X, feature, threshold, left, right, value):
    out = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out


class Tree:
    """Array-backed binary regression tree."""

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)

    @classmethod
    def grow(cls, X, y, max_depth=None, min_leaf=1, max_features=None, seed=0):
        X = np.ascontiguousarray(X, dtype=float)
        y = np.ascontiguousarray(y, dtype=float)
        p = X.shape[1]
        mf = p if max_features is None else int(max_features)
        depth = -1 if max_depth is None else int(max_depth)
        return cls(*_build_tree(X, y, depth, int(min_leaf), mf, np.uint64(seed)))

    @property
    def n_nodes(self) -> int:
        return len(self.value)

    def predict(self, X):
        return _predict_tree(np.ascontiguousarray(X, dtype=float), self.feature, self.threshold,
                             self.left, self.right, self.value)

    def to_nested(self, node: int = 0) -> dict:
        if self.feature[node] == LEAF:
            return {"value": float(self.value[node])}
        return {"feature": int(self.feature[node]), "threshold": float(self.threshold[node]),
                "left": self.to_nested(int(self.left[node])),
                "right": self.to_nested(int(self.right[node]))}

    @classmethod
    def from_nested(cls, tree: dict) -> "Tree":
        feature, threshold, left, right, value = [], [], [], [], []

        def add(node):
            i = len(value)
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(float(node.get("value", 0.0)))
            if "feature" in node:
                feature[i] = int(node["feature"])
                threshold[i] = float(node["threshold"])
                left[i] = add(node["left"])
                right[i] = add(node["right"])
            return i

        add(tree)
        return cls(feature, threshold, left, right, value)


class DecisionTree(Regressor):
    kind = "decision_tree"
    defaults = {"max_depth": None, "min_leaf": 1}

    def _fit(self, X, y, seed, feature_names):
        hp = self.hyperparameters
        self.tree_ = Tree.grow(X, y, hp["max_depth"], hp["min_leaf"], None, seed)

    def _predict(self, X):
        return self.tree_.predict(X)

    def _state(self):
        return {"tree": self.tree_.to_nested()}

    def _load_state(self, state):
        self.tree_ = Tree.from_nested(state["tree"])


class RandomForest(Regressor):
    """Bagged CART trees with per-split feature subsampling (``ceil(p/3)`` by default)."""

    kind = "random_forest"
    defaults = {"n_trees": 100, "max_features": None, "min_leaf": 1, "max_depth": None, "threads": 1}

    def _fit(self, X, y, seed, feature_names):
        hp = self.hyperparameters
        n, p = X.shape
        mf = hp["max_features"] or math.ceil(p / 3)
        # canonical row order so the bootstrap draws do not depend on input order
        order = np.lexsort(np.column_stack([X, y]).T[::-1])
        X, y = np.ascontiguousarray(X[order]), y[order]

        def grow(t):
            s = mix_seed(seed, t)
            rows = np.random.default_rng(s).integers(0, n, n)
            return Tree.grow(X[rows], y[rows], hp["max_depth"], hp["min_leaf"], mf, s)

        if hp["threads"] > 1:
            with ThreadPoolExecutor(hp["threads"]) as pool:
                self.trees_ = list(pool.map(grow, range(hp["n_trees"])))
        else:
            self.trees_ = [grow(t) for t in range(hp["n_trees"])]

    def _predict(self, X):
        X = np.ascontiguousarray(X)
        total = np.zeros(X.shape[0])
        for tree in self.trees_:
            total += tree.predict(X)
        return total / len(self.trees_)

    def _state(self):
        return {"trees": [t.to_nested() for t in self.trees_]}

    def _load_state(self, state):
        self.trees_ = [Tree.from_nested(t) for t in state["trees"]]


class GradientBoosting(Regressor):
    """Stagewise squared-loss boosting of depth-limited trees with shrinkage."""

    kind = "gradient_boosting"
    defaults = {"n_trees": 100, "learning_rate": 0.1, "max_depth": 3, "min_leaf": 1}

    def _fit(self, X, y, seed, feature_names):
        hp = self.hyperparameters
        X = np.ascontiguousarray(X)
        self.init_ = float(y.mean())
        f = np.full(len(y), self.init_)
        self.trees_ = []
        for _ in range(hp["n_trees"]):
            tree = Tree.grow(X, y - f, hp["max_depth"], hp["min_leaf"], None, 0)
            f = f + hp["learning_rate"] * tree.predict(X)
            self.trees_.append(tree)

    def _predict(self, X):
        X = np.ascontiguousarray(X)
        out = np.full(X.shape[0], self.init_)
        lr = self.hyperparameters["learning_rate"]
        for tree in self.trees_:
            out += lr * tree.predict(X)
        return out

    def _state(self):
        return {"init": self.init_, "trees": [t.to_nested() for t in self.trees_]}

    def _load_state(self, state):
        self.init_ = float(state["init"])
        self.trees_ = [Tree.from_nested(t) for t in state["trees"]]
