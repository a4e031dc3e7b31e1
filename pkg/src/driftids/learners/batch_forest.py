"""Batch random forest of CART trees, trained once and then frozen."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ModelFrozen, SingleClassTrainingSet
from .base import Learner, as_array, label_for


class CartTree:
    """Binary CART tree with Gini impurity, stored as flat node lists.

    ``x[feature] <= threshold`` goes left. Leaves store the majority class
    (ties go to malicious).
    """

    def __init__(self, max_features=None, max_depth=None, min_samples_leaf=1, rng=None):
        self.max_features = max_features
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.rng = rng if rng is not None else np.random.default_rng()
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[int] = []

    def _add(self, feature=-1, threshold=0.0, value=-1):
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.feature) - 1

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n_features = X.shape[1]
        m = n_features if self.max_features is None else min(self.max_features, n_features)
        # explicit stack keeps deep trees off the Python call stack
        root = self._add()
        stack = [(root, np.arange(len(y)), 0)]
        while stack:
            node, idx, depth = stack.pop()
            yi = y[idx]
            pos = int(yi.sum())
            if (pos == 0 or pos == len(yi)
                    or (self.max_depth is not None and depth >= self.max_depth)
                    or len(yi) < 2 * self.min_samples_leaf):
                self.value[node] = int(pos * 2 >= len(yi))
                continue
            split = self._best_split(X, y, idx, n_features, m)
            if split is None:
                self.value[node] = int(pos * 2 >= len(yi))
                continue
            f, thr = split
            go_left = X[idx, f] <= thr
            self.feature[node] = f
            self.threshold[node] = thr
            lnode, rnode = self._add(), self._add()
            self.left[node], self.right[node] = lnode, rnode
            stack.append((rnode, idx[~go_left], depth + 1))
            stack.append((lnode, idx[go_left], depth + 1))
        return self

    def _best_split(self, X, y, idx, n_features, m):
        order = self.rng.permutation(n_features)
        best = None
        # sampled features first; fall back to the rest only if none can split
        for start in range(0, n_features, m):
            for f in order[start:start + m]:
                cand = self._split_feature(X[idx, f], y[idx])
                if cand is not None and (best is None or cand[0] < best[0]):
                    best = (cand[0], int(f), cand[1])
            if best is not None:
                break
        return None if best is None else (best[1], best[2])

    def _split_feature(self, xs, ys):
        n = len(xs)
        order = np.argsort(xs, kind="stable")
        xs = xs[order]
        ys = ys[order]
        leaf = self.min_samples_leaf
        pos_left = np.cumsum(ys)[:-1].astype(np.float64)
        n_left = np.arange(1, n, dtype=np.float64)
        n_right = n - n_left
        pos_total = float(ys.sum())
        valid = (xs[1:] > xs[:-1]) & (n_left >= leaf) & (n_right >= leaf)
        if not valid.any():
            return None
        p_l = pos_left / n_left
        p_r = (pos_total - pos_left) / n_right
        # weighted Gini: n_l * 2 p_l (1 - p_l) + n_r * 2 p_r (1 - p_r)
        impurity = n_left * 2 * p_l * (1 - p_l) + n_right * 2 * p_r * (1 - p_r)
        impurity = np.where(valid, impurity, np.inf)
        i = int(np.argmin(impurity))
        lo, hi = xs[i], xs[i + 1]
        thr = (lo + hi) / 2.0
        if not lo <= thr < hi:
            thr = lo
        return float(impurity[i]), float(thr)

    def vote(self, x) -> int:
        feature, threshold, left, right = self.feature, self.threshold, self.left, self.right
        node = 0
        while feature[node] >= 0:
            node = left[node] if x[feature[node]] <= threshold[node] else right[node]
        return self.value[node]

    @property
    def n_nodes(self):
        return len(self.feature)


class BatchRandomForest(Learner):
    """Bootstrap-aggregated CART forest; ``learn`` is refused after ``fit``."""

    name = "batch-rf"

    def __init__(self, n_trees=100, max_features="sqrt", max_depth=None,
                 min_samples_leaf=1, bootstrap=True, seed=0):
        self.n_trees = n_trees
        self.max_features = max_features
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.bootstrap = bootstrap
        self.seed = seed
        self.trees: list[CartTree] = []
        self.frozen = False
        self.drift_events: list[int] = []

    def fit(self, X, y):
        if self.frozen:
            raise ModelFrozen("forest is already trained")
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if len(y) < 2 or len(np.unique(y)) < 2:
            raise SingleClassTrainingSet("batch training needs both classes")
        n, n_features = X.shape
        m = self.max_features
        if m == "sqrt":
            m = math.ceil(math.sqrt(n_features))
        rng = np.random.default_rng(self.seed)
        for _ in range(self.n_trees):
            tree_rng = np.random.default_rng(rng.integers(2**63))
            idx = tree_rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            tree = CartTree(m, self.max_depth, self.min_samples_leaf, tree_rng)
            self.trees.append(tree.fit(X[idx], y[idx]))
        self.frozen = True
        return self

    def predict(self, sample):
        if not self.frozen:
            raise RuntimeError("forest has not been trained")
        x = as_array(sample).tolist()
        score = sum(t.vote(x) for t in self.trees) / len(self.trees)
        return label_for(score), score

    def learn(self, sample, label):
        raise ModelFrozen("batch forest is frozen; retrain from scratch instead")


def batch_train(samples, labels=None, **config) -> BatchRandomForest:
    """Train a frozen forest from FeatureVectors (labels taken from them) or arrays."""
    if labels is None:
        X = np.array([as_array(s) for s in samples])
        y = np.array([int(s.label) for s in samples])
    else:
        X, y = np.asarray(samples, dtype=np.float64), np.asarray(labels)
    return BatchRandomForest(**config).fit(X, y)
