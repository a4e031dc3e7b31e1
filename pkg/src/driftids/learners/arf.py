"""Adaptive random forest: online bagging of Hoeffding trees with per-tree drift handling."""

from __future__ import annotations

import math

import numpy as np

from ..drift import DEFAULT_DELTA, WARNING_DELTA, Adwin
from ..seeding import derive_seed
from .base import DEFAULT_PREDICTION, Learner, as_array, label_for
from .hoeffding import HoeffdingTree


def _rises(detector: Adwin, error: float) -> bool:
    """Feed ``error``; True only for a cut that raised the error estimate."""
    before = detector.estimation
    return detector.update(error) and detector.estimation > before


class _Member:
    __slots__ = ("tree", "warning", "drift", "background", "rng")

    def __init__(self, tree, rng, warning, drift):
        self.tree = tree
        self.rng = rng
        self.warning = warning
        self.drift = drift
        self.background = None


class AdaptiveRandomForest(Learner):
    """Forest of ``n_trees`` Hoeffding trees.

    Each tree sees every sample with Poisson(``lambda_``) weight (or
    ``constant_weight`` when given) and restricts each leaf's split
    candidates to ``max_features`` random features ("sqrt" means
    ceil(sqrt(n_features))). A warning-level ADWIN on the tree's 0/1 error
    starts a background tree; a drift-level ADWIN swaps it in.
    """

    name = "arf"

    def __init__(self, n_features=25, n_trees=10, lambda_=6.0, max_features="sqrt",
                 warning_delta=WARNING_DELTA, drift_delta=DEFAULT_DELTA,
                 detectors=True, constant_weight=None, seed=0, tree_params=None):
        self.n_features = n_features
        self.n_trees = n_trees
        self.lambda_ = lambda_
        if max_features == "sqrt":
            max_features = math.ceil(math.sqrt(n_features))
        self.max_features = max_features
        self.warning_delta = warning_delta
        self.drift_delta = drift_delta
        self.detectors = detectors
        self.constant_weight = constant_weight
        self.seed = seed
        self.tree_params = dict(tree_params or {})
        self.n_samples = 0
        self.n_replacements = 0
        self.n_warnings = 0
        self.drift_events: list[int] = []
        self._trained = False
        self.members = []
        for i in range(n_trees):
            rng = np.random.default_rng(derive_seed(seed, i))
            self.members.append(_Member(self._new_tree(rng), rng,
                                        Adwin(warning_delta), Adwin(drift_delta)))

    def _new_tree(self, rng):
        return HoeffdingTree(n_features=self.n_features, max_features=self.max_features,
                             rng=rng, **self.tree_params)

    def sample_weight(self, rng) -> int:
        if self.constant_weight is not None:
            return self.constant_weight
        return int(rng.poisson(self.lambda_))

    def predict(self, sample):
        if not self._trained:
            return DEFAULT_PREDICTION
        x = as_array(sample)
        num = den = 0.0
        plain = 0.0
        for m in self.members:
            s = m.tree.predict(x)[1]
            w = 1.0 - m.drift.estimation if self.detectors else 1.0
            num += w * s
            den += w
            plain += s
        score = num / den if den > 0 else plain / len(self.members)
        return label_for(score), score

    def learn(self, sample, label):
        x = as_array(sample)
        y = int(label)
        for m in self.members:
            wrong = 1.0 if int(m.tree.predict(x)[0]) != y else 0.0
            k = self.sample_weight(m.rng)
            if k > 0:
                m.tree.learn(x, y, weight=k)
                self._trained = True
                if m.background is not None:
                    m.background.learn(x, y, weight=k)
            if not self.detectors:
                continue
            if _rises(m.warning, wrong):
                self.n_warnings += 1
                if m.background is None:
                    m.background = self._new_tree(m.rng)
                m.warning = Adwin(self.warning_delta)
            if _rises(m.drift, wrong):
                self.n_replacements += 1
                self.drift_events.append(self.n_samples)
                m.tree = m.background if m.background is not None else self._new_tree(m.rng)
                m.background = None
                m.warning = Adwin(self.warning_delta)
                m.drift = Adwin(self.drift_delta)
        self.n_samples += 1
        return self
