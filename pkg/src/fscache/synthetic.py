"""Synthetic embedding worlds and brute-force reference classifiers.

Clusters live on the unit sphere: a record is the normalized sum of its
cluster mean and isotropic gaussian noise scaled by 1/concentration. All
randomness flows through the fixed SplitMix64/Box-Muller stream, so a
spec plus seed pins the dataset byte-for-byte.

These worlds exist to verify code (differential tests against scalar
oracles), not to imitate real CLIP feature geometry.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .cache import CacheModel
from .errors import EmptySupportError
from .inference import AffinityStats, Logits
from .prng import SplitMix64
from .store import (
    REAL_SOURCE,
    EmbeddingRecord,
    EmbeddingSet,
    Label,
    l2_normalize,
)

SYNTHETIC_BACKBONE = "synthetic"


@dataclass
class ClusterSpec:
    name: str
    mean: np.ndarray  # unit vector
    concentration: float  # noise is gauss / concentration


@dataclass
class PoolCounts:
    support_per_source: int
    query_per_source: int


@dataclass
class SyntheticSpec:
    dimension: int
    sources: list[ClusterSpec]  # fake clusters
    real_cluster: ClusterSpec
    counts: PoolCounts
    seed: int

    def validate(self) -> None:
        if self.dimension <= 0:
            raise ValueError("dimension must be positive")
        if self.counts.support_per_source < 1 or self.counts.query_per_source < 1:
            raise ValueError("pool counts must be at least 1")
        for cluster in [self.real_cluster, *self.sources]:
            if cluster.concentration <= 0:
                raise ValueError(f"cluster {cluster.name!r} concentration must be positive")
            norm = float(np.linalg.norm(cluster.mean))
            if abs(norm - 1.0) > 1e-6:
                raise ValueError(f"cluster {cluster.name!r} mean norm {norm:.8f} is not 1")
            if len(cluster.mean) != self.dimension:
                raise ValueError(f"cluster {cluster.name!r} mean has wrong dimension")

    @classmethod
    def from_json(cls, path) -> "SyntheticSpec":
        with open(path) as fh:
            raw = json.load(fh)
        spec = cls(
            dimension=int(raw["dimension"]),
            sources=[
                ClusterSpec(s["name"], np.asarray(s["mean"], dtype=np.float64), float(s["concentration"]))
                for s in raw["sources"]
            ],
            real_cluster=ClusterSpec(
                REAL_SOURCE,
                np.asarray(raw["real_cluster"]["mean"], dtype=np.float64),
                float(raw["real_cluster"]["concentration"]),
            ),
            counts=PoolCounts(
                int(raw["counts"]["support_per_source"]),
                int(raw["counts"]["query_per_source"]),
            ),
            seed=int(raw["seed"]),
        )
        spec.validate()
        return spec


def generate(spec: SyntheticSpec) -> EmbeddingSet:
    """Deterministic dataset: real cluster first, then fake sources in
    listed order; per cluster the support pool precedes the query pool.
    Record ids end in "s<i>" (support pool) or "q<i>" (query pool)."""
    spec.validate()
    rng = SplitMix64(spec.seed)
    records: list[EmbeddingRecord] = []
    for cluster, label in [(spec.real_cluster, Label.REAL)] + [
        (c, Label.FAKE) for c in spec.sources
    ]:
        for pool_tag, n in (("s", spec.counts.support_per_source), ("q", spec.counts.query_per_source)):
            for i in range(n):
                noise = rng.gauss_vector(spec.dimension) / cluster.concentration
                vector = l2_normalize(np.asarray(cluster.mean, dtype=np.float64) + noise)
                records.append(
                    EmbeddingRecord(
                        id=f"{cluster.name}-{pool_tag}{i:05d}",
                        source=cluster.name,
                        label=label,
                        vector=vector,
                    )
                )
    return EmbeddingSet(
        dimension=spec.dimension,
        backbone=SYNTHETIC_BACKBONE,
        layer=0,
        normalized=True,
        records=records,
    )


def generate_pools(spec: SyntheticSpec) -> tuple[EmbeddingSet, EmbeddingSet]:
    """The generated set split into its support and query pools."""
    combined = generate(spec)

    def subset(tag: str) -> EmbeddingSet:
        return EmbeddingSet(
            dimension=combined.dimension,
            backbone=combined.backbone,
            layer=combined.layer,
            normalized=True,
            records=[r for r in combined.records if r.id.rsplit("-", 1)[1].startswith(tag)],
        )

    return subset("s"), subset("q")


def _random_unit(rng: SplitMix64, dim: int) -> np.ndarray:
    return l2_normalize(rng.gauss_vector(dim))


def _correlated_means(dim: int, n: int, similarity: float) -> list[np.ndarray]:
    """n unit means with pairwise cosine similarity exactly `similarity`.

    Built as sqrt(rho) * shared + sqrt(1-rho) * e_i over orthonormal
    directions, so the overlap is controlled, not sampled.
    """
    basis = np.eye(dim)[: n + 1]
    shared = basis[n]
    return [
        math.sqrt(similarity) * shared + math.sqrt(1.0 - similarity) * basis[i] for i in range(n)
    ]


GENIMAGE6_SOURCES = ["adm", "biggan", "glide", "midjourney", "sd", "vqdm"]


def preset_genimage6(
    seed: int,
    support_per_source: int = 32,
    query_per_source: int = 150,
    concentration: float = 10.0,
) -> SyntheticSpec:
    """Six fake generators plus real, D=64, well-separated random means."""
    dim = 64
    rng = SplitMix64(seed ^ 0xC1D5_7E57)  # means come from a derived stream
    real_mean = _random_unit(rng, dim)
    sources = [
        ClusterSpec(name, _random_unit(rng, dim), concentration) for name in GENIMAGE6_SOURCES
    ]
    return SyntheticSpec(
        dimension=dim,
        sources=sources,
        real_cluster=ClusterSpec(REAL_SOURCE, real_mean, concentration),
        counts=PoolCounts(support_per_source, query_per_source),
        seed=seed,
    )


def preset_separable2(
    seed: int,
    support_per_source: int = 16,
    query_per_source: int = 200,
) -> SyntheticSpec:
    """One fake source vs real with antipodal means: linearly separable."""
    dim = 16
    mean = np.zeros(dim)
    mean[0] = 1.0
    return SyntheticSpec(
        dimension=dim,
        sources=[ClusterSpec("synthgen", -mean, 40.0)],
        real_cluster=ClusterSpec(REAL_SOURCE, mean.copy(), 40.0),
        counts=PoolCounts(support_per_source, query_per_source),
        seed=seed,
    )


def preset_overlap2(
    seed: int,
    support_per_source: int = 16,
    query_per_source: int = 200,
    mean_similarity: float = 0.8,
    real_concentration: float = 5.0,
    fake_concentration: float = 12.0,
) -> SyntheticSpec:
    """Two fake sources plus real with pairwise mean similarity 0.8.

    The real cluster is deliberately broader than the fake ones (real
    imagery is more diverse than any single generator's output), which
    leaves the training-free weighting miscalibrated: key fine-tuning has
    actual headroom here instead of only overfitting the support.
    """
    dim = 64
    means = _correlated_means(dim, 3, mean_similarity)
    return SyntheticSpec(
        dimension=dim,
        sources=[
            ClusterSpec("gen_a", means[0], fake_concentration),
            ClusterSpec("gen_b", means[1], fake_concentration),
        ],
        real_cluster=ClusterSpec(REAL_SOURCE, means[2], real_concentration),
        counts=PoolCounts(support_per_source, query_per_source),
        seed=seed,
    )


PRESETS = {
    "genimage6": preset_genimage6,
    "separable2": preset_separable2,
    "overlap2": preset_overlap2,
}


def knn_oracle(support_records: list[EmbeddingRecord], queries: EmbeddingSet, k: int) -> list[Label]:
    """Majority label among the k most-cosine-similar support records.

    Exhaustive scan, no index; similarity ties resolve by support order.
    """
    if not support_records:
        raise EmptySupportError("knn oracle needs a nonempty support")
    if k < 1 or k % 2 == 0:
        raise ValueError(f"k must be odd and positive, got {k}")
    keys = [l2_normalize(r.vector) for r in support_records]
    labels = [r.label for r in support_records]
    out: list[Label] = []
    for rec in queries.records:
        q = l2_normalize(rec.vector)
        sims = [(-float(np.dot(q, key)), idx) for idx, key in enumerate(keys)]
        sims.sort()
        top = [labels[idx] for _, idx in sims[: min(k, len(sims))]]
        fake_votes = sum(lbl == Label.FAKE for lbl in top)
        out.append(Label.FAKE if fake_votes * 2 > len(top) else Label.REAL)
    return out


def exact_logits_oracle(query: np.ndarray, cache: CacheModel) -> Logits:
    """Scalar-loop, compensated-summation recomputation of the pipeline.

    Independent of the numpy implementation: every dot product and the
    label aggregation run through math.fsum.
    """
    if cache.n_entries == 0:
        raise EmptySupportError("cache has no entries")
    q = [float(x) for x in np.asarray(query, dtype=np.float64)]
    if len(q) != cache.dimension:
        raise ValueError(f"query dimension {len(q)} != cache dimension {cache.dimension}")
    sims: list[float] = []
    for i in range(cache.n_entries):
        row = cache.feature_bank[i]
        s = math.fsum(q[j] * float(row[j]) for j in range(len(q)))
        if cache.keys_normalized:
            s = min(1.0, max(-1.0, s))
        sims.append(s)
    weights = [math.exp(-cache.alpha * (1.0 - s)) for s in sims]
    values = np.array(
        [
            math.fsum(weights[i] * float(cache.label_bank[i, c]) for i in range(cache.n_entries))
            for c in (0, 1)
        ]
    )
    argmax = max(range(len(sims)), key=lambda i: (sims[i], -i))
    return Logits(values=values, stats=AffinityStats(sims[argmax], argmax))
