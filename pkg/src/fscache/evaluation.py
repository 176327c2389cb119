"""Evaluation harness: per-generator accuracy, mAcc, F1, AP, and sweeps.

Per-generator accuracy scores that generator's fakes pooled with the real
queries (all of them by default, or the generator's share of an optional
real partition). mAcc is the unweighted mean over fake generators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cache import CacheModel, build_cache, sample_support
from .errors import DimensionMismatchError, EmptyInputError
from .inference import Prediction, batch_predict
from .metrics import accuracy, average_precision, f1_score
from .metrics import NoPositivesError
from .store import EmbeddingSet, Label


@dataclass
class SourceStats:
    accuracy: float
    count: int


@dataclass
class OverallStats:
    accuracy: float
    f1: float
    average_precision: float | None
    macc: float | None


@dataclass
class EvalReport:
    per_source: dict[str, SourceStats]
    overall: OverallStats
    config: dict

    def to_dict(self) -> dict:
        return {
            "config": dict(self.config),
            "per_source": {
                src: {"accuracy": st.accuracy, "count": st.count}
                for src, st in self.per_source.items()
            },
            "overall": {
                "accuracy": self.overall.accuracy,
                "f1": self.overall.f1,
                "average_precision": self.overall.average_precision,
                "mAcc": self.overall.macc,
            },
        }


def variant_of(cache: CacheModel) -> str:
    return "ftnet" if cache.keys_normalized else "ftnet-t"


def evaluate(
    cache: CacheModel,
    queries: EmbeddingSet,
    variant: str | None = None,
    real_partition: dict[str, str] | None = None,
) -> EvalReport:
    """Classify every query and aggregate the paper-style metrics.

    real_partition optionally maps real record ids to a fake source name;
    partitioned reals count only toward that source's pool while
    unpartitioned reals stay shared by every source.
    """
    if len(queries) == 0:
        raise EmptyInputError("query set is empty")
    if queries.dimension != cache.dimension:
        raise DimensionMismatchError(
            f"cache dimension {cache.dimension} != query dimension {queries.dimension}"
        )
    preds: list[Prediction] = batch_predict(queries, cache)
    truths = [rec.label for rec in queries.records]

    overall_acc = accuracy(preds, truths)
    overall_f1 = f1_score(preds, truths)
    scores = [p.logits.fake - p.logits.real for p in preds]
    try:
        ap = average_precision(scores, truths)
    except NoPositivesError:
        ap = None

    fake_idx_by_source: dict[str, list[int]] = {}
    real_idx: list[int] = []
    for i, rec in enumerate(queries.records):
        if rec.label == Label.FAKE:
            fake_idx_by_source.setdefault(rec.source, []).append(i)
        else:
            real_idx.append(i)

    per_source: dict[str, SourceStats] = {}
    for src in sorted(fake_idx_by_source):
        pool = list(fake_idx_by_source[src])
        if real_partition:
            pool += [
                i
                for i in real_idx
                if real_partition.get(queries.records[i].id, src) == src
            ]
        else:
            pool += real_idx
        per_source[src] = SourceStats(
            accuracy=accuracy([preds[i] for i in pool], [truths[i] for i in pool]),
            count=len(pool),
        )
    macc = (
        float(np.mean([st.accuracy for st in per_source.values()])) if per_source else None
    )

    config = {
        "k": cache.build_metadata.get("k"),
        "seed": cache.build_metadata.get("seed"),
        "alpha": cache.alpha,
        "backbone": cache.build_metadata.get("backbone"),
        "layer": cache.build_metadata.get("layer"),
        "variant": variant or variant_of(cache),
    }
    return EvalReport(
        per_source=per_source,
        overall=OverallStats(overall_acc, overall_f1, ap, macc),
        config=config,
    )


@dataclass
class SweepGrid:
    shots: list[int]
    alphas: list[float]
    seeds: list[int]

    def points(self) -> list[tuple[int, float, int]]:
        return [(k, a, s) for k in self.shots for a in self.alphas for s in self.seeds]


def exclude_ids(corpus: EmbeddingSet, ids: set[str]) -> EmbeddingSet:
    """Corpus with the named records removed, order preserved."""
    return EmbeddingSet(
        dimension=corpus.dimension,
        backbone=corpus.backbone,
        layer=corpus.layer,
        normalized=corpus.normalized,
        records=[r for r in corpus.records if r.id not in ids],
    )


def run_grid_point(
    corpus: EmbeddingSet,
    k: int,
    alpha: float,
    seed: int,
    queries: EmbeddingSet | None = None,
) -> EvalReport:
    """One sweep cell: resample support, build, evaluate.

    Without an explicit query set, the cached records are held out and
    the rest of the corpus is scored.
    """
    support = sample_support(corpus, k, seed)
    cache = build_cache(support, alpha)
    target = queries if queries is not None else exclude_ids(corpus, set(support.ids()))
    return evaluate(cache, target)


def sweep(
    corpus: EmbeddingSet,
    grid: SweepGrid,
    queries: EmbeddingSet | None = None,
) -> list[EvalReport]:
    """One report per (k, alpha, seed) grid point, in grid order."""
    if not grid.points():
        raise EmptyInputError("sweep grid is empty")
    return [run_grid_point(corpus, k, a, s, queries) for (k, a, s) in grid.points()]
