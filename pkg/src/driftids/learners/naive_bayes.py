"""Incremental Gaussian naive Bayes with Welford per-class moments."""

from __future__ import annotations

import numpy as np

from .base import DEFAULT_PREDICTION, Learner, as_array, label_for

_LOG_2PI = np.log(2.0 * np.pi)


class GaussianNB(Learner):
    """Two-class Gaussian naive Bayes updated one sample at a time.

    Variance smoothing per feature is ``var_floor + var_scale * range``,
    where ``range`` is the running max-min of that feature over all
    samples seen.
    """

    name = "nb"

    def __init__(self, n_features=25, var_floor=1e-9, var_scale=1e-6):
        self.n_features = n_features
        self.var_floor = var_floor
        self.var_scale = var_scale
        self.counts = np.zeros(2)
        self.means = np.zeros((2, n_features))
        self.m2 = np.zeros((2, n_features))
        self.lo = np.full(n_features, np.inf)
        self.hi = np.full(n_features, -np.inf)
        self.drift_events = []

    @property
    def variances(self):
        """Population variances per (class, feature), before smoothing."""
        with np.errstate(invalid="ignore", divide="ignore"):
            v = self.m2 / self.counts[:, None]
        return np.where(self.counts[:, None] > 0, np.maximum(v, 0.0), 0.0)

    def smoothing(self):
        span = np.where(np.isfinite(self.hi - self.lo), self.hi - self.lo, 0.0)
        return self.var_floor + self.var_scale * span

    def learn(self, sample, label):
        x = as_array(sample)
        c = int(label)
        self.counts[c] += 1
        d = x - self.means[c]
        self.means[c] += d / self.counts[c]
        self.m2[c] += d * (x - self.means[c])
        np.minimum(self.lo, x, out=self.lo)
        np.maximum(self.hi, x, out=self.hi)
        return self

    def joint_log_likelihood(self, sample):
        """log prior + sum of per-feature Gaussian log densities, per class.

        Classes never observed get -inf.
        """
        x = as_array(sample)
        total = self.counts.sum()
        var = self.variances + self.smoothing()
        out = np.full(2, -np.inf)
        for c in (0, 1):
            if self.counts[c] == 0:
                continue
            ll = -0.5 * (_LOG_2PI + np.log(var[c]) + (x - self.means[c]) ** 2 / var[c])
            out[c] = np.log(self.counts[c] / total) + ll.sum()
        return out

    def predict(self, sample):
        if self.counts.sum() == 0:
            return DEFAULT_PREDICTION
        jll = self.joint_log_likelihood(sample)
        top = jll.max()
        w = np.exp(jll - top)
        score = float(w[1] / w.sum())
        return label_for(score), score
