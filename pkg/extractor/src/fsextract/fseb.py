"""Writer for the FSEB embedding container consumed by the classifier.

Layout (little-endian): magic "FSEB", u16 version = 1, u32 header length,
UTF-8 JSON header {dimension, backbone, layer, normalized, count}, then
per record: u16 id length + id, u16 source length + source, u8 label
(0 real / 1 fake), dimension float32 values. This is the wire contract
with the classifier package; `fscache validate` is the reference checker.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"FSEB"
VERSION = 1
REAL_SOURCE = "real"


@dataclass
class Record:
    id: str
    source: str
    label: int  # 0 real, 1 fake
    vector: np.ndarray


def l2_normalize(vector: np.ndarray) -> np.ndarray:
    v = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if not np.isfinite(norm) or norm < 1e-12:
        raise ValueError(f"cannot normalize vector with norm {norm}")
    return v / norm


def write_fseb(path, records: list[Record], dimension: int, backbone: str, layer: int, normalized: bool = True) -> None:
    header = json.dumps(
        {
            "dimension": dimension,
            "backbone": backbone,
            "layer": layer,
            "normalized": normalized,
            "count": len(records),
        },
        sort_keys=True,
    ).encode("utf-8")
    parts = [MAGIC, struct.pack("<H", VERSION), struct.pack("<I", len(header)), header]
    seen = set()
    for rec in records:
        if rec.vector.shape != (dimension,):
            raise ValueError(f"record {rec.id!r}: vector shape {rec.vector.shape} != ({dimension},)")
        if rec.id in seen:
            raise ValueError(f"duplicate record id {rec.id!r}")
        seen.add(rec.id)
        rid = rec.id.encode("utf-8")
        src = rec.source.encode("utf-8")
        parts += [
            struct.pack("<H", len(rid)),
            rid,
            struct.pack("<H", len(src)),
            src,
            struct.pack("B", rec.label),
            np.asarray(rec.vector, dtype="<f4").tobytes(),
        ]
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))
