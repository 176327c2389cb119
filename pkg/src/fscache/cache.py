"""Key-value cache construction under the balanced k-shot protocol.

The cache pairs a feature bank (unit-norm key vectors) with a label bank
(one-hot value rows). Support sampling draws k fakes per generator and k
reals per generator from the shared real pool, so the real total exceeds
any single generator's fake count whenever two or more generators are
present.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptySupportError,
    MetadataMismatchError,
    NoFakeRecordsError,
    NonPositiveAlphaError,
    NoRealRecordsError,
)
from .prng import SplitMix64
from .store import (
    REAL_SOURCE,
    EmbeddingRecord,
    EmbeddingSet,
    Label,
    l2_normalize,
    read_container,
    write_embedding_file,
)

DEFAULT_ALPHA = 15.0


def one_hot(label: Label) -> np.ndarray:
    """real -> [1, 0]; fake -> [0, 1]."""
    out = np.zeros(2, dtype=np.float64)
    out[int(label)] = 1.0
    return out


@dataclass
class SupportSet:
    """The k-shot sample a cache is built from.

    Record order is deterministic: each fake source's picks in draw order,
    sources in lexicographic order, then the real draws in draw order.
    shortfall maps any source (including "real") that yielded fewer than
    its target count to the number actually taken.
    """

    records: list[EmbeddingRecord]
    shots_per_source: int
    seed: int
    sources: list[str]
    shortfall: dict[str, int]
    dimension: int
    backbone: str
    layer: int

    def ids(self) -> list[str]:
        return [r.id for r in self.records]


@dataclass
class CacheModel:
    """Feature bank + label bank with build metadata.

    Immutable after build. keys_normalized is True for training-free
    caches (unit rows, similarities clamped to [-1, 1] at query time) and
    False for fine-tuned caches, whose learned keys are deliberately not
    re-normalized and whose similarities are left unclamped.
    """

    feature_bank: np.ndarray  # N x D float64
    label_bank: np.ndarray  # N x 2 one-hot float64
    entry_sources: list[str]
    entry_ids: list[str]
    alpha: float
    build_metadata: dict = field(default_factory=dict)
    keys_normalized: bool = True

    @property
    def n_entries(self) -> int:
        return int(self.feature_bank.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.feature_bank.shape[1])

    def entry_labels(self) -> np.ndarray:
        return np.argmax(self.label_bank, axis=1).astype(np.int64)


def sample_support(corpus: EmbeddingSet, k: int, seed: int) -> SupportSet:
    """Draw the balanced k-shot support deterministically.

    One SplitMix64 stream seeded with `seed` drives, in order: a
    Fisher-Yates shuffle of each fake source's record positions (sources
    in lexicographic order), then one shuffle of the real pool. Each fake
    source contributes min(k, available) records; reals are allocated k
    per fake source from the front of the shuffled pool until exhausted.
    """
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    fake_by_source: dict[str, list[int]] = {}
    real_pool: list[int] = []
    for i, rec in enumerate(corpus.records):
        if rec.label == Label.FAKE:
            fake_by_source.setdefault(rec.source, []).append(i)
        else:
            real_pool.append(i)
    if not real_pool:
        raise NoRealRecordsError("corpus has no real records")
    if not fake_by_source:
        raise NoFakeRecordsError("corpus has no fake records")

    rng = SplitMix64(seed)
    sources = sorted(fake_by_source)
    shortfall: dict[str, int] = {}
    chosen: list[int] = []
    for src in sources:
        pool = list(fake_by_source[src])
        rng.shuffle(pool)
        take = pool[: min(k, len(pool))]
        if len(take) < k:
            shortfall[src] = len(take)
        chosen.extend(take)

    rng.shuffle(real_pool)
    cursor = 0
    real_taken = 0
    for _ in sources:
        take = min(k, len(real_pool) - cursor)
        cursor += take
        real_taken += take
    chosen.extend(real_pool[:real_taken])
    if real_taken < k * len(sources):
        shortfall[REAL_SOURCE] = real_taken

    return SupportSet(
        records=[corpus.records[i] for i in chosen],
        shots_per_source=k,
        seed=seed,
        sources=sources,
        shortfall=shortfall,
        dimension=corpus.dimension,
        backbone=corpus.backbone,
        layer=corpus.layer,
    )


def build_cache(support: SupportSet, alpha: float = DEFAULT_ALPHA) -> CacheModel:
    """Normalize support features into keys and one-hot labels into values.

    Rows follow support order exactly; the cache never mutates afterwards.
    """
    if not support.records:
        raise EmptySupportError("support set is empty")
    if alpha <= 0:
        raise NonPositiveAlphaError(f"alpha must be positive, got {alpha}")
    feature_bank = np.vstack([l2_normalize(r.vector) for r in support.records])
    label_bank = np.vstack([one_hot(r.label) for r in support.records])
    return CacheModel(
        feature_bank=feature_bank,
        label_bank=label_bank,
        entry_sources=[r.source for r in support.records],
        entry_ids=[r.id for r in support.records],
        alpha=float(alpha),
        build_metadata={
            "seed": support.seed,
            "k": support.shots_per_source,
            "backbone": support.backbone,
            "layer": support.layer,
        },
        keys_normalized=True,
    )


def support_to_embedding_set(support: SupportSet) -> EmbeddingSet:
    """Support records as a writable set (used for the --support-out file)."""
    return EmbeddingSet(
        dimension=support.dimension,
        backbone=support.backbone,
        layer=support.layer,
        normalized=False,
        records=list(support.records),
    )


def write_cache_file(cache: CacheModel, path) -> None:
    """Persist a cache in the embedding container with a cache header."""
    records = []
    for i in range(cache.n_entries):
        records.append(
            EmbeddingRecord(
                id=cache.entry_ids[i],
                source=cache.entry_sources[i],
                label=Label(int(cache.entry_labels()[i])),
                vector=cache.feature_bank[i],
            )
        )
    emb = EmbeddingSet(
        dimension=cache.dimension,
        backbone=str(cache.build_metadata.get("backbone", "")),
        layer=int(cache.build_metadata.get("layer", 0)),
        normalized=cache.keys_normalized,
        records=records,
    )
    write_embedding_file(
        emb,
        path,
        extra_header={
            "cache": {
                "alpha": cache.alpha,
                "k": cache.build_metadata.get("k"),
                "seed": cache.build_metadata.get("seed"),
            }
        },
    )


def read_cache_file(path) -> CacheModel:
    """Load a cache persisted by write_cache_file.

    Keys round-trip at f32 precision; a fine-tuned cache keeps its
    normalized=false flag and therefore its unclamped query path.
    """
    emb, header = read_container(path)
    if "cache" not in header:
        raise MetadataMismatchError(f"{path} is an embedding file, not a cache file (no cache header)")
    meta = header["cache"]
    alpha = float(meta.get("alpha", DEFAULT_ALPHA))
    if alpha <= 0:
        raise NonPositiveAlphaError(f"cache header alpha must be positive, got {alpha}")
    if len(emb.records) == 0:
        raise EmptySupportError("cache file has no entries")
    feature_bank = emb.vectors()
    label_bank = np.vstack([one_hot(r.label) for r in emb.records])
    return CacheModel(
        feature_bank=feature_bank,
        label_bank=label_bank,
        entry_sources=emb.sources(),
        entry_ids=emb.ids(),
        alpha=alpha,
        build_metadata={
            "seed": meta.get("seed"),
            "k": meta.get("k"),
            "backbone": emb.backbone,
            "layer": emb.layer,
        },
        keys_normalized=emb.normalized,
    )


def check_query_dimension(cache: CacheModel, dimension: int) -> None:
    if dimension != cache.dimension:
        raise DimensionMismatchError(
            f"cache dimension {cache.dimension} != query dimension {dimension}"
        )
