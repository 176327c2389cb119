"""Cache fine-tuning: the feature bank becomes a learnable linear adapter.

The adapter weight matrix starts as the transposed feature bank, so the
tuned and training-free paths are identical at step 0. Cross-entropy over
the two aggregated logits is minimized with a from-scratch AdamW
(decoupled weight decay) for a fixed number of full-batch epochs; the
label bank stays frozen throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .cache import CacheModel
from .errors import (
    DimensionMismatchError,
    EmptyCacheError,
    NonFiniteError,
    SupportMismatchError,
)
from .cache import SupportSet


@dataclass(frozen=True)
class FinetuneConfig:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    epochs: int = 20


@dataclass
class AdapterState:
    """Learnable weights plus AdamW moment buffers."""

    weights: np.ndarray  # D x N
    m: np.ndarray  # first moment, D x N
    v: np.ndarray  # second moment, D x N
    step: int
    config: FinetuneConfig
    alpha: float


@dataclass
class EpochLog:
    epoch: int
    loss: float
    support_accuracy: float


@dataclass
class TrainLog:
    """Loss/accuracy trace. Entries are measured after each epoch's update;
    initial_* capture the untrained state."""

    initial_loss: float
    initial_accuracy: float
    epochs: list[EpochLog] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "initial_loss": self.initial_loss,
            "initial_accuracy": self.initial_accuracy,
            "epochs": [
                {"epoch": e.epoch, "loss": e.loss, "support_accuracy": e.support_accuracy}
                for e in self.epochs
            ],
        }


def init_adapter(cache: CacheModel, config: FinetuneConfig = FinetuneConfig()) -> AdapterState:
    """Adapter weights = feature bank transposed, moments zeroed, step 0."""
    if cache.n_entries == 0:
        raise EmptyCacheError("cannot initialize an adapter from an empty cache")
    weights = cache.feature_bank.T.copy()
    return AdapterState(
        weights=weights,
        m=np.zeros_like(weights),
        v=np.zeros_like(weights),
        step=0,
        config=config,
        alpha=cache.alpha,
    )


def adapter_forward(query: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Similarities as a plain linear map: query (D,) times weights (D, N)."""
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1 or weights.ndim != 2 or weights.shape[0] != q.shape[0]:
        raise DimensionMismatchError(
            f"query dimension {q.shape} incompatible with adapter shape {weights.shape}"
        )
    return q @ weights


def loss_and_grad(
    features: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray,
    label_bank: np.ndarray,
    alpha: float,
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its analytic adapter gradient.

    Forward: s = F W; w = exp(-alpha (1 - s)); logits = w L. Backward
    chains softmax cross-entropy through the aggregation, the activation
    (dw/ds = alpha * w), and the linear map.
    """
    F = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64)
    if F.shape[0] == 0:
        raise ValueError("batch is empty")
    if F.shape[0] != y.shape[0]:
        raise ValueError(f"{F.shape[0]} feature rows vs {y.shape[0]} labels")

    sims = F @ weights  # B x N
    act = np.exp(-alpha * (1.0 - sims))  # B x N
    logits = act @ label_bank  # B x 2
    if not np.all(np.isfinite(logits)):
        raise NonFiniteError("forward pass overflowed; keys have drifted too far")

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    n = F.shape[0]
    loss = float(-log_probs[np.arange(n), y].mean())

    probs = np.exp(log_probs)
    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    dact = dlogits @ label_bank.T  # B x N
    dsims = alpha * act * dact  # B x N
    grad = F.T @ dsims  # D x N
    if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
        raise NonFiniteError("loss or gradient is not finite")
    return loss, grad


def adamw_step(state: AdapterState, grad: np.ndarray) -> AdapterState:
    """One decoupled-weight-decay Adam update; returns the new state."""
    if grad.shape != state.weights.shape:
        raise DimensionMismatchError(f"gradient shape {grad.shape} != weights shape {state.weights.shape}")
    if not np.all(np.isfinite(grad)):
        raise NonFiniteError("gradient is not finite")
    cfg = state.config
    t = state.step + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad * grad
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    weights = state.weights - cfg.lr * (m_hat / (np.sqrt(v_hat) + cfg.eps) + cfg.weight_decay * state.weights)
    if not np.all(np.isfinite(weights)):
        raise NonFiniteError("updated weights are not finite")
    return replace(state, weights=weights, m=m, v=v, step=t)


def _support_accuracy(features, labels, weights, label_bank, alpha) -> float:
    logits = np.exp(-alpha * (1.0 - features @ weights)) @ label_bank
    pred = (logits[:, 1] > logits[:, 0]).astype(np.int64)  # tie resolves to real
    return float((pred == labels).mean())


def finetune(
    cache: CacheModel,
    support: SupportSet,
    config: FinetuneConfig = FinetuneConfig(),
) -> tuple[CacheModel, TrainLog]:
    """Full-batch fine-tuning of the cache keys on the cached records.

    The support must be the exact set the cache was built from (checked
    by record id sequence). Returns an inference-compatible cache whose
    keys are the learned adapter columns, not re-normalized, plus the
    training log. The label bank is byte-identical to the input's.
    """
    if support.ids() != cache.entry_ids:
        raise SupportMismatchError("support record ids do not match the cache's entries")

    features = cache.feature_bank.copy()  # the cached records double as training data
    labels = cache.entry_labels()
    label_bank = cache.label_bank
    state = init_adapter(cache, config)

    initial_loss, _ = loss_and_grad(features, labels, state.weights, label_bank, cache.alpha)
    log = TrainLog(
        initial_loss=initial_loss,
        initial_accuracy=_support_accuracy(features, labels, state.weights, label_bank, cache.alpha),
    )
    for epoch in range(1, config.epochs + 1):
        _, grad = loss_and_grad(features, labels, state.weights, label_bank, cache.alpha)
        state = adamw_step(state, grad)
        loss, _ = loss_and_grad(features, labels, state.weights, label_bank, cache.alpha)
        log.epochs.append(
            EpochLog(
                epoch=epoch,
                loss=loss,
                support_accuracy=_support_accuracy(features, labels, state.weights, label_bank, cache.alpha),
            )
        )

    tuned = CacheModel(
        feature_bank=state.weights.T.copy(),
        label_bank=cache.label_bank.copy(),
        entry_sources=list(cache.entry_sources),
        entry_ids=list(cache.entry_ids),
        alpha=cache.alpha,
        build_metadata=dict(cache.build_metadata),
        keys_normalized=False,
    )
    return tuned, log
