"""The predict/learn contract every online model follows."""

from __future__ import annotations

import numpy as np

from ..labels import BENIGN, MALICIOUS, Label

DEFAULT_PREDICTION = (BENIGN, 0.5)


def as_array(sample) -> np.ndarray:
    """Accept a FeatureVector or a bare feature array."""
    return np.asarray(getattr(sample, "features", sample), dtype=np.float64)


def label_for(score: float) -> Label:
    # a score of exactly 0.5 counts as malicious
    return MALICIOUS if score >= 0.5 else BENIGN


class Learner:
    """Online binary classifier.

    ``predict`` returns ``(label, malicious_score)`` and never changes the
    model. A model that has never learned answers ``(BENIGN, 0.5)``.
    """

    name = "learner"
    drift_events: list

    def predict(self, sample):
        raise NotImplementedError

    def learn(self, sample, label):
        raise NotImplementedError
