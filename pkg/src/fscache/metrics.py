"""Classification metrics: accuracy, fake-class F1, average precision."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyInputError, LengthMismatchError, NoPositivesError
from .store import Label


def _as_labels(seq: Iterable) -> list[Label]:
    out = []
    for item in seq:
        label = getattr(item, "label", item)
        out.append(Label(int(label)))
    return out


def accuracy(preds: Sequence, truths: Sequence) -> float:
    """Fraction of exact label matches."""
    p, t = _as_labels(preds), _as_labels(truths)
    if len(p) != len(t):
        raise LengthMismatchError(f"{len(p)} predictions vs {len(t)} truths")
    if not p:
        raise EmptyInputError("no predictions to score")
    return sum(a == b for a, b in zip(p, t)) / len(p)


def f1_score(preds: Sequence, truths: Sequence, positive: Label = Label.FAKE) -> float:
    """Harmonic mean of precision and recall for the positive class.

    Returns 0 when precision + recall is 0 (no true or predicted
    positives).
    """
    p, t = _as_labels(preds), _as_labels(truths)
    if len(p) != len(t):
        raise LengthMismatchError(f"{len(p)} predictions vs {len(t)} truths")
    if not p:
        raise EmptyInputError("no predictions to score")
    tp = sum(a == positive and b == positive for a, b in zip(p, t))
    fp = sum(a == positive and b != positive for a, b in zip(p, t))
    fn = sum(a != positive and b == positive for a, b in zip(p, t))
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


def average_precision(scores: Sequence[float], truths: Sequence) -> float:
    """Step-interpolated PR summation over the descending-score ranking.

    AP = sum_k (R_k - R_{k-1}) * P_k, which reduces to the mean of
    precision@k over the ranks where a positive sits. Ties keep input
    order (stable sort), so the result is bit-reproducible.
    """
    t = _as_labels(truths)
    s = np.asarray(list(scores), dtype=np.float64)
    if s.shape[0] != len(t):
        raise LengthMismatchError(f"{s.shape[0]} scores vs {len(t)} truths")
    if len(t) == 0:
        raise EmptyInputError("no scores to rank")
    positives = sum(lbl == Label.FAKE for lbl in t)
    if positives == 0:
        raise NoPositivesError("average precision needs at least one positive")
    order = np.argsort(-s, kind="stable")
    hits = 0
    total = 0.0
    for rank, idx in enumerate(order, start=1):
        if t[int(idx)] == Label.FAKE:
            hits += 1
            total += hits / rank
    return total / positives
