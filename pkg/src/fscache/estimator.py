"""scikit-learn estimator facade over the functional cache classifier.

CacheClassifier is the training-free variant: fit() memorizes the given
exemplars as a key-value cache (no parameter updates), predict() runs the
activation-weighted label aggregation. TunedCacheClassifier additionally
fine-tunes the cache keys with AdamW after building the cache.

Both fit on arbitrary finite feature rows (internally l2-normalized) so
they compose with sklearn pipelines and model selection.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .cache import CacheModel, SupportSet, one_hot
from .finetune import FinetuneConfig, finetune as _finetune_cache
from .inference import predict as _predict_one
from .store import EmbeddingRecord, Label, l2_normalize
from .validation import check_binary_targets, check_feature_matrix


class CacheClassifier(BaseEstimator, ClassifierMixin):
    """Training-free key-value cache classifier.

    Parameters
    ----------
    alpha : float, default 15.0
        Sharpness of the similarity activation exp(-alpha * (1 - s)).

    Attributes
    ----------
    classes_ : ndarray of shape (n_classes,)
        Sorted class labels seen in fit. classes_[0] takes the tie-break
        slot; classes_[1] is the positive (fake) slot.
    cache_ : CacheModel
        The built feature/label banks.
    """

    def __init__(self, alpha: float = 15.0):
        self.alpha = alpha

    def _build_cache(self, X, y) -> None:
        X = check_feature_matrix(X)
        classes, slot = check_binary_targets(y, X.shape[0])
        keys = np.vstack([l2_normalize(row) for row in X])
        labels = np.vstack([one_hot(Label(int(s))) for s in slot])
        self.classes_ = classes
        self.n_features_in_ = X.shape[1]
        self.cache_ = CacheModel(
            feature_bank=keys,
            label_bank=labels,
            entry_sources=[str(classes[s]) for s in slot],
            entry_ids=[f"fit-{i}" for i in range(X.shape[0])],
            alpha=float(self.alpha),
            build_metadata={"k": None, "seed": None, "backbone": "estimator", "layer": 0},
            keys_normalized=True,
        )

    def fit(self, X, y):
        self._build_cache(X, y)
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "cache_"):
            raise NotFittedError("call fit before predict")

    def predict_logits(self, X) -> np.ndarray:
        """Raw (n, 2) logits: column 0 = classes_[0], column 1 = classes_[1]."""
        self._check_fitted()
        X = check_feature_matrix(X, self.n_features_in_)
        out = np.empty((X.shape[0], 2), dtype=np.float64)
        for i, row in enumerate(X):
            out[i] = _predict_one(l2_normalize(row), self.cache_).logits.values
        return out

    def decision_function(self, X) -> np.ndarray:
        """Margin logit(classes_[1]) - logit(classes_[0])."""
        logits = self.predict_logits(X)
        return logits[:, 1] - logits[:, 0]

    def predict(self, X) -> np.ndarray:
        logits = self.predict_logits(X)
        slot = (logits[:, 1] > logits[:, 0]).astype(np.int64)  # tie -> classes_[0]
        if self.classes_.shape[0] == 1:
            slot[:] = 0
        return self.classes_[slot]


class TunedCacheClassifier(CacheClassifier):
    """Cache classifier whose keys are fine-tuned as a linear adapter.

    Parameters
    ----------
    alpha : float, default 15.0
    learning_rate : float, default 0.001
    weight_decay : float, default 0.01
    epochs : int, default 20

    Attributes
    ----------
    train_log_ : TrainLog
        Per-epoch loss and support accuracy from the fine-tuning run.
    """

    def __init__(
        self,
        alpha: float = 15.0,
        learning_rate: float = 0.001,
        weight_decay: float = 0.01,
        epochs: int = 20,
    ):
        super().__init__(alpha=alpha)
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.epochs = epochs

    def fit(self, X, y):
        self._build_cache(X, y)
        support = _support_from_cache(self.cache_)
        config = FinetuneConfig(
            lr=self.learning_rate,
            weight_decay=self.weight_decay,
            epochs=self.epochs,
        )
        self.cache_, self.train_log_ = _finetune_cache(self.cache_, support, config)
        return self


def _support_from_cache(cache: CacheModel) -> SupportSet:
    records = [
        EmbeddingRecord(
            id=cache.entry_ids[i],
            source=cache.entry_sources[i],
            label=Label(int(cache.entry_labels()[i])),
            vector=cache.feature_bank[i],
        )
        for i in range(cache.n_entries)
    ]
    return SupportSet(
        records=records,
        shots_per_source=cache.build_metadata.get("k") or 0,
        seed=cache.build_metadata.get("seed") or 0,
        sources=sorted({r.source for r in records if r.label == Label.FAKE}),
        shortfall={},
        dimension=cache.dimension,
        backbone=str(cache.build_metadata.get("backbone", "")),
        layer=int(cache.build_metadata.get("layer", 0)),
    )
