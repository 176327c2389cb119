"""Few-shot, training-free cache classifier for embedding-space
AI-generated-image detection.

The high-level interface is the pair of sklearn-style estimators; the
functional modules underneath expose every operation individually.
"""

__version__ = "0.1.0"

from .cache import CacheModel, SupportSet, build_cache, one_hot, sample_support
from .errors import FscacheError
from .estimator import CacheClassifier, TunedCacheClassifier
from .evaluation import EvalReport, SweepGrid, evaluate, sweep
from .finetune import AdapterState, FinetuneConfig, TrainLog, finetune
from .inference import Logits, Prediction, batch_predict, predict
from .metrics import accuracy, average_precision, f1_score
from .store import (
    EmbeddingRecord,
    EmbeddingSet,
    Label,
    l2_normalize,
    merge,
    read_embedding_file,
    write_embedding_file,
)
from .synthetic import SyntheticSpec, exact_logits_oracle, generate, knn_oracle

__all__ = [
    "AdapterState",
    "CacheClassifier",
    "CacheModel",
    "EmbeddingRecord",
    "EmbeddingSet",
    "EvalReport",
    "FinetuneConfig",
    "FscacheError",
    "Label",
    "Logits",
    "Prediction",
    "SupportSet",
    "SweepGrid",
    "SyntheticSpec",
    "TrainLog",
    "TunedCacheClassifier",
    "accuracy",
    "average_precision",
    "batch_predict",
    "build_cache",
    "evaluate",
    "exact_logits_oracle",
    "f1_score",
    "finetune",
    "generate",
    "knn_oracle",
    "l2_normalize",
    "merge",
    "one_hot",
    "predict",
    "read_embedding_file",
    "sample_support",
    "sweep",
    "write_embedding_file",
]
