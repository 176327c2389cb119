import numpy as np
import pytest

from fscache.store import EmbeddingRecord, EmbeddingSet, Label, l2_normalize


def make_record(rec_id, source, label, vector):
    return EmbeddingRecord(id=rec_id, source=source, label=label, vector=np.asarray(vector, dtype=np.float64))


def make_set(records, dimension, normalized=False, backbone="test", layer=12):
    return EmbeddingSet(dimension=dimension, backbone=backbone, layer=layer, normalized=normalized, records=records)


def random_corpus(rng, fake_counts: dict, n_real: int, dim: int, normalized=True):
    """Corpus with the given per-source fake counts and a real pool."""
    records = []
    for src in sorted(fake_counts):
        for i in range(fake_counts[src]):
            v = rng.normal(size=dim)
            records.append(make_record(f"{src}-{i}", src, Label.FAKE, l2_normalize(v) if normalized else v))
    for i in range(n_real):
        v = rng.normal(size=dim)
        records.append(make_record(f"real-{i}", "real", Label.REAL, l2_normalize(v) if normalized else v))
    return make_set(records, dim, normalized=normalized)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
