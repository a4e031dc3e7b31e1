"""Hoeffding trees for binary streams, with the adaptive (HAT) variant.

Leaves keep per-class weighted Gaussian moments for their candidate
features. Split candidates are evaluated at evenly spaced points of the
observed range and scored by information gain (bits), so the gain range
for two classes is 1.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from ..drift import Adwin, cut_threshold
from .base import DEFAULT_PREDICTION, Learner, as_array, label_for


def hoeffding_bound(value_range, delta, n):
    return math.sqrt(value_range * value_range * math.log(1.0 / delta) / (2.0 * n))


def _entropy(a, b):
    """Binary entropy in bits of class weights (a, b), elementwise; 0 for empty."""
    tot = a + b
    with np.errstate(divide="ignore", invalid="ignore"):
        pa = np.where(tot > 0, a / tot, 0.0)
        pb = np.where(tot > 0, b / tot, 0.0)
        ha = np.where(pa > 0, -pa * np.log2(np.where(pa > 0, pa, 1.0)), 0.0)
        hb = np.where(pb > 0, -pb * np.log2(np.where(pb > 0, pb, 1.0)), 0.0)
    return ha + hb


class _Leaf:
    __slots__ = ("counts", "feats", "ow", "mean", "m2", "lo", "hi",
                 "seen", "last_attempt", "adwin")

    def __init__(self, counts, feats, adwin=None):
        self.counts = list(counts)
        self.feats = feats
        m = len(feats)
        self.ow = [0.0, 0.0]
        self.mean = np.zeros((2, m))
        self.m2 = np.zeros((2, m))
        self.lo = np.full(m, np.inf)
        self.hi = np.full(m, -np.inf)
        self.seen = 0.0
        self.last_attempt = 0.0
        self.adwin = adwin

    def observe(self, x, c, w):
        self.counts[c] += w
        self.seen += w
        xs = x[self.feats]
        self.ow[c] += w
        mc = self.mean[c]
        d = xs - mc
        mc += d * (w / self.ow[c])
        self.m2[c] += w * d * (xs - mc)
        np.minimum(self.lo, xs, out=self.lo)
        np.maximum(self.hi, xs, out=self.hi)

    def score(self):
        tot = self.counts[0] + self.counts[1]
        if tot <= 0:
            return None
        return (self.counts[1] + 1.0) / (tot + 2.0)


class _Branch:
    __slots__ = ("feature", "threshold", "left", "right", "adwin", "alternate")

    def __init__(self, feature, threshold, left, right, adwin=None):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.adwin = adwin
        self.alternate = None


class SplitEvent:
    __slots__ = ("sample", "weight", "feature", "threshold", "g1", "g2", "epsilon")

    def __init__(self, sample, weight, feature, threshold, g1, g2, epsilon):
        self.sample = sample
        self.weight = weight
        self.feature = feature
        self.threshold = threshold
        self.g1 = g1
        self.g2 = g2
        self.epsilon = epsilon

    def __repr__(self):
        return (f"SplitEvent(f{self.feature + 1}<={self.threshold:.4g}, n={self.weight:g}, "
                f"G1={self.g1:.4f}, G2={self.g2:.4f}, eps={self.epsilon:.4f})")


class HoeffdingTree(Learner):
    """Very fast decision tree on numeric features.

    ``max_features`` restricts every new leaf to a random subset of that
    many features (used by the forest); None means all features.
    ``adaptive=True`` adds an ADWIN error monitor to every node and grows
    alternate subtrees when a node's error rises.
    """

    name = "ht"

    def __init__(self, n_features=25, grace_period=200, split_confidence=1e-7,
                 tie_threshold=0.05, n_thresholds=10, max_features=None,
                 min_branch_fraction=0.01, adaptive=False, adwin_delta=0.002,
                 switch_min_width=200, switch_delta=0.05, seed=None, rng=None):
        self.n_features = n_features
        self.grace_period = grace_period
        self.split_confidence = split_confidence
        self.tie_threshold = tie_threshold
        self.n_thresholds = n_thresholds
        self.max_features = max_features
        self.min_branch_fraction = min_branch_fraction
        self.adaptive = adaptive
        self.adwin_delta = adwin_delta
        self.switch_min_width = switch_min_width
        self.switch_delta = switch_delta
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self._fractions = np.arange(1, n_thresholds + 1) / (n_thresholds + 1)
        self._all_feats = np.arange(n_features)
        self.n_samples = 0
        self.split_log: list[SplitEvent] = []
        self.drift_events: list[int] = []
        self.n_switches = 0
        self.root = self._new_leaf((0.0, 0.0))

    # -- structure -------------------------------------------------------------
    def _new_leaf(self, counts):
        m = self.max_features
        if m is None or m >= self.n_features:
            feats = self._all_feats
        else:
            feats = np.sort(self.rng.choice(self.n_features, size=m, replace=False))
        return _Leaf(counts, feats, Adwin(self.adwin_delta) if self.adaptive else None)

    @staticmethod
    def _leaf_of(node, x):
        while node.__class__ is _Branch:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node

    def iter_nodes(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if isinstance(node, _Branch):
                stack.extend((node.left, node.right))

    def branches(self):
        return [n for n in self.iter_nodes() if isinstance(n, _Branch)]

    @property
    def n_leaves(self):
        return sum(1 for n in self.iter_nodes() if isinstance(n, _Leaf))

    @property
    def depth(self):
        def d(node):
            if isinstance(node, _Leaf):
                return 0
            return 1 + max(d(node.left), d(node.right))
        return d(self.root)

    @property
    def has_learned(self):
        return self.n_samples > 0

    # -- predict ---------------------------------------------------------------
    def predict(self, sample):
        score = self._leaf_of(self.root, as_array(sample)).score()
        if score is None:
            return DEFAULT_PREDICTION
        return label_for(score), score

    @classmethod
    def _subtree_label(cls, node, x):
        score = cls._leaf_of(node, x).score()
        return 0 if score is None else int(score >= 0.5)

    # -- learn -----------------------------------------------------------------
    def learn(self, sample, label, weight=1.0):
        x = as_array(sample)
        self.n_samples += 1
        if self.adaptive:
            self.root = self._learn_adaptive(self.root, x, int(label), weight)
            return self
        c = int(label)
        parent = None
        node = self.root
        went_left = False
        while node.__class__ is _Branch:
            parent = node
            went_left = x[node.feature] <= node.threshold
            node = node.left if went_left else node.right
        node.observe(x, c, weight)
        if node.seen - node.last_attempt >= self.grace_period:
            new = self._attempt_split(node)
            if new is not node:
                if parent is None:
                    self.root = new
                elif went_left:
                    parent.left = new
                else:
                    parent.right = new
        return self

    def _learn_adaptive(self, node, x, c, w):
        """Train the subtree at ``node``; returns whatever now occupies its slot."""
        err = self._subtree_label(node, x) != c
        adwin = node.adwin
        before = adwin.estimation
        changed = adwin.update(1.0 if err else 0.0)
        is_branch = node.__class__ is _Branch
        if changed and adwin.estimation > before:
            if is_branch and node.alternate is None:
                node.alternate = self._new_leaf((0.0, 0.0))
                self.drift_events.append(self.n_samples - 1)
        elif is_branch and node.alternate is not None:
            alt = node.alternate
            n_orig, n_alt = adwin.width, alt.adwin.width
            if n_orig > self.switch_min_width and n_alt > self.switch_min_width:
                e_orig, e_alt = adwin.estimation, alt.adwin.estimation
                bound = cut_threshold(n_orig, n_alt, e_orig * (1.0 - e_orig), self.switch_delta)
                if e_alt + bound < e_orig:
                    self.n_switches += 1
                    return self._learn_adaptive(alt, x, c, w)
                if e_orig + bound < e_alt:
                    node.alternate = None

        if not is_branch:
            node.observe(x, c, w)
            if node.seen - node.last_attempt >= self.grace_period:
                return self._attempt_split(node)
            return node
        if node.alternate is not None:
            node.alternate = self._learn_adaptive(node.alternate, x, c, w)
        if x[node.feature] <= node.threshold:
            node.left = self._learn_adaptive(node.left, x, c, w)
        else:
            node.right = self._learn_adaptive(node.right, x, c, w)
        return node

    # -- splitting -------------------------------------------------------------
    def evaluate_splits(self, leaf):
        """Best information gain and threshold for each candidate feature.

        Returns ``(gains, thresholds, left_counts)`` with one entry per
        leaf feature; infeasible features get gain -inf.
        """
        ow = leaf.ow
        W = ow[0] + ow[1]
        lo, hi = leaf.lo, leaf.hi
        span = hi - lo
        feasible = np.isfinite(span) & (span > 0)
        safe_lo = np.where(feasible, lo, 0.0)
        safe_span = np.where(feasible, span, 0.0)
        t = safe_lo[:, None] + safe_span[:, None] * self._fractions[None, :]
        left = []
        for c in (0, 1):
            if ow[c] <= 0:
                left.append(np.zeros_like(t))
                continue
            mu = leaf.mean[c][:, None]
            sd = np.sqrt(np.maximum(leaf.m2[c], 0.0) / ow[c])[:, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                z = (t - mu) / sd
            frac = np.where(sd > 0, ndtr(z), (mu <= t).astype(np.float64))
            left.append(ow[c] * frac)
        l0, l1 = left
        r0, r1 = ow[0] - l0, ow[1] - l1
        r0 = np.maximum(r0, 0.0)
        r1 = np.maximum(r1, 0.0)
        lw, rw = l0 + l1, r0 + r1
        parent_h = float(_entropy(np.array(ow[0]), np.array(ow[1])))
        gain = parent_h - (lw * _entropy(l0, l1) + rw * _entropy(r0, r1)) / W
        small = np.minimum(lw, rw) < self.min_branch_fraction * W
        gain = np.where(small | ~feasible[:, None], -np.inf, gain)
        best = np.argmax(gain, axis=1)
        rows = np.arange(len(best))
        return gain[rows, best], t[rows, best], np.stack([l0[rows, best], l1[rows, best]], axis=1)

    def _attempt_split(self, leaf):
        leaf.last_attempt = leaf.seen
        if leaf.ow[0] <= 0 or leaf.ow[1] <= 0:
            return leaf
        gains, thresholds, left_counts = self.evaluate_splits(leaf)
        order = np.argsort(-gains, kind="stable")
        g1 = float(gains[order[0]])
        if not g1 > 0:
            return leaf
        g2 = max(float(gains[order[1]]), 0.0) if len(order) > 1 else 0.0
        n = leaf.ow[0] + leaf.ow[1]
        eps = hoeffding_bound(1.0, self.split_confidence, n)
        if not (g1 - g2 > eps or eps < self.tie_threshold):
            return leaf
        j = order[0]
        feature = int(leaf.feats[j])
        threshold = float(thresholds[j])
        lc = left_counts[j]
        left = self._new_leaf((float(lc[0]), float(lc[1])))
        right = self._new_leaf((max(leaf.ow[0] - lc[0], 0.0), max(leaf.ow[1] - lc[1], 0.0)))
        self.split_log.append(SplitEvent(self.n_samples, n, feature, threshold, g1, g2, eps))
        return _Branch(feature, threshold, left, right, leaf.adwin)


class HoeffdingAdaptiveTree(HoeffdingTree):
    name = "hat"

    def __init__(self, **kwargs):
        kwargs.setdefault("adaptive", True)
        super().__init__(**kwargs)
