import json
import struct

import numpy as np
import pytest
from PIL import Image


def read_fseb(path):
    """Minimal reader for assertions; the authoritative checker is
    `fscache validate`."""
    data = open(path, "rb").read()
    assert data[:4] == b"FSEB"
    (version,) = struct.unpack("<H", data[4:6])
    assert version == 1
    (hlen,) = struct.unpack("<I", data[6:10])
    header = json.loads(data[10 : 10 + hlen])
    pos = 10 + hlen
    records = []
    for _ in range(header["count"]):
        (id_len,) = struct.unpack("<H", data[pos : pos + 2])
        pos += 2
        rec_id = data[pos : pos + id_len].decode("utf-8")
        pos += id_len
        (src_len,) = struct.unpack("<H", data[pos : pos + 2])
        pos += 2
        source = data[pos : pos + src_len].decode("utf-8")
        pos += src_len
        label = data[pos]
        pos += 1
        dim = header["dimension"]
        vector = np.frombuffer(data[pos : pos + 4 * dim], dtype="<f4").astype(np.float64)
        pos += 4 * dim
        records.append({"id": rec_id, "source": source, "label": label, "vector": vector})
    assert pos == len(data)
    return header, records


def synthetic_image(seed: int, size=(320, 240)) -> Image.Image:
    """Deterministic noisy-gradient test image."""
    rng = np.random.default_rng(seed)
    w, h = size
    x = np.linspace(0, 255, w)[None, :, None]
    y = np.linspace(0, 255, h)[:, None, None]
    base = np.concatenate([x + 0 * y, 0 * x + y, (x + y) / 2], axis=2)
    noise = rng.uniform(-40, 40, size=(h, w, 3))
    return Image.fromarray(np.clip(base + noise, 0, 255).astype(np.uint8))


@pytest.fixture(scope="session")
def smoke_images(tmp_path_factory):
    """10-image set: 6 real, 4 fake, written as lossless PNGs."""
    root = tmp_path_factory.mktemp("images")
    real_dir = root / "real"
    fake_dir = root / "genx"
    real_dir.mkdir()
    fake_dir.mkdir()
    for i in range(6):
        synthetic_image(100 + i).save(real_dir / f"real_{i}.png")
    for i in range(4):
        synthetic_image(200 + i, size=(280, 300)).save(fake_dir / f"fake_{i}.png")
    return real_dir, fake_dir
