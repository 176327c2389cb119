"""Training-free classification: affinity, activation, label aggregation.

A query is compared against every cached key by cosine similarity, the
similarities pass through exp(-alpha * (1 - s)) to become positive
weights, and the weights aggregate the one-hot label bank into two
logits. The predicted label is the argmax; an exact tie resolves to real.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cache import CacheModel
from .errors import (
    DimensionMismatchError,
    EmptyCacheError,
    LengthMismatchError,
    NonPositiveAlphaError,
)
from .store import EmbeddingSet, Label, check_unit_norm


@dataclass
class AffinityStats:
    """Diagnostics from the pre-activation similarities."""

    max_similarity: float
    argmax_entry_index: int


@dataclass
class Logits:
    values: np.ndarray  # shape (2,), [real, fake], nonnegative
    stats: AffinityStats | None = None

    @property
    def real(self) -> float:
        return float(self.values[0])

    @property
    def fake(self) -> float:
        return float(self.values[1])


@dataclass
class Prediction:
    label: Label
    logits: Logits
    tie_broken: bool = False


def affinity(query: np.ndarray, feature_bank: np.ndarray) -> np.ndarray:
    """Cosine similarity of a unit query against unit-row keys.

    Reduces to one matrix-vector product because both sides are already
    normalized; results are clamped to [-1, 1] to absorb float drift.
    """
    q = np.asarray(query, dtype=np.float64)
    bank = np.asarray(feature_bank, dtype=np.float64)
    if q.ndim != 1 or bank.ndim != 2 or bank.shape[1] != q.shape[0]:
        raise DimensionMismatchError(
            f"query dimension {q.shape} incompatible with bank shape {bank.shape}"
        )
    check_unit_norm(q, "query")
    return np.clip(bank @ q, -1.0, 1.0)


def activate(similarities: np.ndarray, alpha: float) -> np.ndarray:
    """exp(-alpha * (1 - s)): strictly increasing, positive weights."""
    if alpha <= 0:
        raise NonPositiveAlphaError(f"alpha must be positive, got {alpha}")
    s = np.asarray(similarities, dtype=np.float64)
    return np.exp(-alpha * (1.0 - s))


def aggregate(weights: np.ndarray, label_bank: np.ndarray, stats: AffinityStats | None = None) -> Logits:
    """Weighted sum of one-hot label rows: logits[c] = sum_i w[i] * L[i, c]."""
    w = np.asarray(weights, dtype=np.float64)
    bank = np.asarray(label_bank, dtype=np.float64)
    if w.ndim != 1 or bank.ndim != 2 or bank.shape[0] != w.shape[0]:
        raise LengthMismatchError(
            f"{w.shape[0] if w.ndim == 1 else w.shape} weights vs {bank.shape} label bank"
        )
    return Logits(values=w @ bank, stats=stats)


def _decide(logits: Logits) -> Prediction:
    if logits.fake > logits.real:
        return Prediction(Label.FAKE, logits)
    if logits.fake == logits.real:
        return Prediction(Label.REAL, logits, tie_broken=True)
    return Prediction(Label.REAL, logits)


def query_logits(query: np.ndarray, cache: CacheModel) -> Logits:
    """Full pipeline for one query against one cache.

    Fine-tuned caches skip clamping (learned keys are not unit-norm, so
    similarities may legitimately leave [-1, 1]).
    """
    if cache.n_entries == 0:
        raise EmptyCacheError("cache has no entries")
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != cache.dimension:
        raise DimensionMismatchError(
            f"cache dimension {cache.dimension} != query dimension {q.shape[0] if q.ndim == 1 else q.shape}"
        )
    if cache.keys_normalized:
        sims = affinity(q, cache.feature_bank)
    else:
        check_unit_norm(q, "query")
        sims = cache.feature_bank @ q
    argmax = int(np.argmax(sims))
    stats = AffinityStats(max_similarity=float(sims[argmax]), argmax_entry_index=argmax)
    weights = activate(sims, cache.alpha)
    return aggregate(weights, cache.label_bank, stats)


def predict(query: np.ndarray, cache: CacheModel) -> Prediction:
    return _decide(query_logits(query, cache))


def batch_predict(queries: EmbeddingSet, cache: CacheModel) -> list[Prediction]:
    """Elementwise identical to mapping predict over the records, in order."""
    if queries.dimension != cache.dimension:
        raise DimensionMismatchError(
            f"cache dimension {cache.dimension} != query dimension {queries.dimension}"
        )
    return [predict(rec.vector, cache) for rec in queries.records]
