import math

import numpy as np
import pytest

from fscache import errors
from fscache.cache import (
    CacheModel,
    build_cache,
    one_hot,
    read_cache_file,
    sample_support,
    support_to_embedding_set,
    write_cache_file,
)
from fscache.store import Label, l2_normalize
from conftest import make_record, make_set, random_corpus
from test_prng import reference_splitmix64


class TestOneHot:
    def test_real(self):
        assert np.array_equal(one_hot(Label.REAL), [1.0, 0.0])

    def test_fake(self):
        assert np.array_equal(one_hot(Label.FAKE), [0.0, 1.0])

    def test_one_hot_property(self):
        for label in Label:
            v = one_hot(label)
            assert v.sum() == 1.0
            assert set(v.tolist()) <= {0.0, 1.0}


def _reference_sample(corpus, k, seed):
    """Independent re-derivation of the sampling protocol from the raw
    SplitMix64 stream (no fscache.prng involvement)."""
    stream = iter(reference_splitmix64(seed, 10_000))

    def shuffle(items):
        for i in range(len(items) - 1, 0, -1):
            j = next(stream) % (i + 1)
            items[i], items[j] = items[j], items[i]

    fakes, reals = {}, []
    for i, rec in enumerate(corpus.records):
        if rec.label == Label.FAKE:
            fakes.setdefault(rec.source, []).append(i)
        else:
            reals.append(i)
    chosen = []
    for src in sorted(fakes):
        pool = list(fakes[src])
        shuffle(pool)
        chosen += pool[: min(k, len(pool))]
    shuffle(reals)
    take = 0
    for _ in sorted(fakes):
        take += min(k, len(reals) - take)
    chosen += reals[:take]
    return [corpus.records[i].id for i in chosen]


class TestSampleSupport:
    def test_balanced_counts_two_sources(self, rng):
        corpus = random_corpus(rng, {"a": 10, "b": 10}, n_real=100, dim=8)
        support = sample_support(corpus, 4, seed=7)
        sources = [r.source for r in support.records]
        assert sources.count("a") == 4
        assert sources.count("b") == 4
        assert sources.count("real") == 8
        assert len(support.records) == 16
        assert len(set(support.ids())) == 16
        assert support.shortfall == {}

    def test_real_total_exceeds_single_source(self, rng):
        corpus = random_corpus(rng, {"a": 20, "b": 20, "c": 20}, n_real=200, dim=8)
        support = sample_support(corpus, 5, seed=1)
        sources = [r.source for r in support.records]
        n_real = sources.count("real")
        for src in ("a", "b", "c"):
            assert n_real > sources.count(src)

    def test_deterministic_across_calls(self, rng):
        corpus = random_corpus(rng, {"a": 10, "b": 10}, n_real=100, dim=8)
        s1 = sample_support(corpus, 4, seed=7)
        s2 = sample_support(corpus, 4, seed=7)
        assert s1.ids() == s2.ids()

    def test_seed_changes_selection(self, rng):
        corpus = random_corpus(rng, {"a": 10, "b": 10}, n_real=100, dim=8)
        assert sample_support(corpus, 4, seed=7).ids() != sample_support(corpus, 4, seed=8).ids()

    def test_shortfall_reported(self, rng):
        corpus = random_corpus(rng, {"a": 2, "b": 10}, n_real=50, dim=8)
        support = sample_support(corpus, 4, seed=3)
        assert support.shortfall == {"a": 2}
        sources = [r.source for r in support.records]
        assert sources.count("a") == 2
        assert sources.count("b") == 4
        assert sources.count("real") == 8

    def test_real_shortfall_reported(self, rng):
        corpus = random_corpus(rng, {"a": 5, "b": 5}, n_real=3, dim=8)
        support = sample_support(corpus, 4, seed=3)
        assert support.shortfall == {"real": 3}
        assert [r.source for r in support.records].count("real") == 3

    def test_matches_raw_stream_rederivation(self, rng):
        corpus = random_corpus(rng, {"a": 2, "b": 9, "c": 17}, n_real=60, dim=4)
        for seed in (3, 11, 99):
            support = sample_support(corpus, 4, seed=seed)
            assert support.ids() == _reference_sample(corpus, 4, seed)

    def test_no_record_selected_twice(self, rng):
        corpus = random_corpus(rng, {"a": 6, "b": 6}, n_real=9, dim=4)
        support = sample_support(corpus, 5, seed=0)
        assert len(support.ids()) == len(set(support.ids()))

    def test_errors(self, rng):
        no_real = random_corpus(rng, {"a": 3}, n_real=0, dim=4)
        with pytest.raises(errors.NoRealRecordsError):
            sample_support(no_real, 2, seed=0)
        no_fake = random_corpus(rng, {}, n_real=3, dim=4)
        with pytest.raises(errors.NoFakeRecordsError):
            sample_support(no_fake, 2, seed=0)
        ok = random_corpus(rng, {"a": 3}, n_real=3, dim=4)
        with pytest.raises(ValueError):
            sample_support(ok, 0, seed=0)

    def test_purity_corpus_untouched(self, rng):
        corpus = random_corpus(rng, {"a": 10}, n_real=20, dim=8)
        before_ids = corpus.ids()
        before = corpus.vectors().copy()
        sample_support(corpus, 4, seed=0)
        assert corpus.ids() == before_ids
        assert np.array_equal(corpus.vectors(), before)


class TestBuildCache:
    def test_two_orthogonal_records(self):
        real = make_record("r", "real", Label.REAL, [1.0, 0.0])
        fake = make_record("f", "gan", Label.FAKE, [0.0, 2.0])
        corpus = make_set([fake, real], 2)
        support = sample_support(corpus, 1, seed=0)
        cache = build_cache(support, 15.0)
        assert cache.n_entries == 2
        assert np.array_equal(sorted(cache.label_bank.tolist()), [[0.0, 1.0], [1.0, 0.0]])
        assert np.allclose(np.linalg.norm(cache.feature_bank, axis=1), 1.0)

    def test_row_count_equals_support_size(self, rng):
        corpus = random_corpus(rng, {"a": 8, "b": 8}, n_real=40, dim=16, normalized=False)
        support = sample_support(corpus, 3, seed=5)
        cache = build_cache(support)
        assert cache.n_entries == len(support.records)
        assert cache.entry_ids == support.ids()
        assert cache.alpha == 15.0

    def test_row_norms_via_independent_recomputation(self, rng):
        corpus = random_corpus(rng, {"a": 8, "b": 8}, n_real=40, dim=32, normalized=False)
        cache = build_cache(sample_support(corpus, 4, seed=9))
        for row in cache.feature_bank:
            norm = math.sqrt(math.fsum(float(x) * float(x) for x in row))
            assert abs(norm - 1.0) < 1e-9

    def test_build_leaves_support_vectors_untouched(self, rng):
        corpus = random_corpus(rng, {"a": 4}, n_real=8, dim=8, normalized=False)
        support = sample_support(corpus, 2, seed=6)
        before = [r.vector.copy() for r in support.records]
        build_cache(support)
        for rec, orig in zip(support.records, before):
            assert np.array_equal(rec.vector, orig)

    def test_rows_follow_support_order(self, rng):
        corpus = random_corpus(rng, {"a": 5, "b": 5}, n_real=20, dim=8)
        support = sample_support(corpus, 2, seed=1)
        cache = build_cache(support)
        for i, rec in enumerate(support.records):
            assert np.allclose(cache.feature_bank[i], l2_normalize(rec.vector), rtol=0, atol=0)
            assert cache.entry_sources[i] == rec.source

    def test_permutation_equivariance(self, rng):
        corpus = random_corpus(rng, {"a": 5, "b": 5}, n_real=20, dim=8)
        support = sample_support(corpus, 2, seed=1)
        cache = build_cache(support)
        perm = list(rng.permutation(len(support.records)))
        shuffled = type(support)(
            records=[support.records[i] for i in perm],
            shots_per_source=support.shots_per_source,
            seed=support.seed,
            sources=support.sources,
            shortfall=support.shortfall,
            dimension=support.dimension,
            backbone=support.backbone,
            layer=support.layer,
        )
        cache2 = build_cache(shuffled)
        assert cache2.entry_sources == [cache.entry_sources[i] for i in perm]
        assert np.array_equal(cache2.feature_bank, cache.feature_bank[perm])
        assert np.array_equal(cache2.label_bank, cache.label_bank[perm])

    def test_empty_support_rejected(self, rng):
        corpus = random_corpus(rng, {"a": 2}, n_real=2, dim=4)
        support = sample_support(corpus, 1, seed=0)
        support.records = []
        with pytest.raises(errors.EmptySupportError):
            build_cache(support)

    def test_bad_alpha_rejected(self, rng):
        corpus = random_corpus(rng, {"a": 2}, n_real=2, dim=4)
        support = sample_support(corpus, 1, seed=0)
        with pytest.raises(errors.NonPositiveAlphaError):
            build_cache(support, alpha=0.0)

    def test_zero_vector_propagates(self):
        corpus = make_set(
            [make_record("f", "gan", Label.FAKE, [0.0, 0.0]), make_record("r", "real", Label.REAL, [1.0, 0.0])],
            2,
        )
        support = sample_support(corpus, 1, seed=0)
        with pytest.raises(errors.ZeroVectorError):
            build_cache(support)


class TestCachePersistence:
    def test_cache_file_round_trip(self, rng, tmp_path):
        corpus = random_corpus(rng, {"a": 6, "b": 6}, n_real=30, dim=8)
        support = sample_support(corpus, 3, seed=2)
        cache = build_cache(support, alpha=22.5)
        path = tmp_path / "cache.fseb"
        write_cache_file(cache, path)
        back = read_cache_file(path)
        assert back.alpha == 22.5
        assert back.entry_ids == cache.entry_ids
        assert back.entry_sources == cache.entry_sources
        assert back.keys_normalized is True
        assert back.build_metadata["k"] == 3
        assert back.build_metadata["seed"] == 2
        assert np.array_equal(back.label_bank, cache.label_bank)
        # keys survive at f32 precision
        assert np.allclose(back.feature_bank, cache.feature_bank, rtol=0, atol=1e-7)

    def test_plain_embedding_file_is_not_a_cache(self, rng, tmp_path):
        corpus = random_corpus(rng, {"a": 2}, n_real=2, dim=4)
        path = tmp_path / "plain.fseb"
        from fscache.store import write_embedding_file

        write_embedding_file(corpus, path)
        with pytest.raises(errors.MetadataMismatchError):
            read_cache_file(path)

    def test_support_round_trips_for_finetune(self, rng, tmp_path):
        corpus = random_corpus(rng, {"a": 4}, n_real=8, dim=8)
        support = sample_support(corpus, 2, seed=4)
        from fscache.store import read_embedding_file, write_embedding_file

        path = tmp_path / "support.fseb"
        write_embedding_file(support_to_embedding_set(support), path)
        back = read_embedding_file(path)
        assert back.ids() == support.ids()
