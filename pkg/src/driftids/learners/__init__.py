from .arf import AdaptiveRandomForest
from .base import DEFAULT_PREDICTION, Learner, label_for
from .batch_forest import BatchRandomForest, CartTree, batch_train
from .hoeffding import HoeffdingAdaptiveTree, HoeffdingTree, hoeffding_bound
from .naive_bayes import GaussianNB
from .snapshot import load_model, save_model

LEARNERS = {
    "nb": GaussianNB,
    "hat": HoeffdingAdaptiveTree,
    "arf": AdaptiveRandomForest,
    "batch-rf": BatchRandomForest,
}


def make_learner(name, seed=0, **params):
    """Build a learner by its CLI name; seeded learners get ``seed``."""
    try:
        cls = LEARNERS[name]
    except KeyError:
        raise ValueError(f"unknown learner {name!r}; choose from {sorted(LEARNERS)}") from None
    if cls is GaussianNB:
        return cls(**params)
    return cls(seed=seed, **params)


__all__ = [
    "AdaptiveRandomForest", "BatchRandomForest", "CartTree", "DEFAULT_PREDICTION",
    "GaussianNB", "HoeffdingAdaptiveTree", "HoeffdingTree", "LEARNERS", "Learner",
    "batch_train", "hoeffding_bound", "label_for", "load_model", "make_learner", "save_model",
]
