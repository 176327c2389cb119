import json
import subprocess

import numpy as np
import pytest

from fsextract.fseb import Record, l2_normalize, write_fseb
from conftest import read_fseb


def _records(n=3, dim=8):
    rng = np.random.default_rng(7)
    out = []
    for i in range(n):
        label = i % 2
        out.append(
            Record(
                id=f"src{label}/img{i}.png",
                source="genx" if label else "real",
                label=label,
                vector=l2_normalize(rng.normal(size=dim)),
            )
        )
    return out


def test_written_file_passes_fscache_validate(tmp_path):
    path = tmp_path / "out.fseb"
    write_fseb(path, _records(), dimension=8, backbone="clip-test/L1", layer=1)
    proc = subprocess.run(["fscache", "validate", str(path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    summary = json.loads(proc.stdout)
    assert summary["valid"] is True
    assert summary["count"] == 3
    assert summary["dimension"] == 8


def test_round_trip_through_minimal_reader(tmp_path):
    path = tmp_path / "out.fseb"
    records = _records(5, dim=16)
    write_fseb(path, records, dimension=16, backbone="clip-test/L2", layer=2)
    header, back = read_fseb(path)
    assert header["backbone"] == "clip-test/L2"
    assert header["normalized"] is True
    assert [r["id"] for r in back] == [r.id for r in records]
    for got, want in zip(back, records):
        assert np.allclose(got["vector"], want.vector, rtol=0, atol=1e-7)


def test_duplicate_ids_rejected(tmp_path):
    records = _records(2)
    records[1].id = records[0].id
    with pytest.raises(ValueError, match="duplicate"):
        write_fseb(tmp_path / "dup.fseb", records, 8, "b", 1)


def test_dimension_enforced(tmp_path):
    records = _records(1, dim=8)
    with pytest.raises(ValueError, match="shape"):
        write_fseb(tmp_path / "dim.fseb", records, 9, "b", 1)


def test_zero_vector_rejected():
    with pytest.raises(ValueError):
        l2_normalize(np.zeros(4))
