"""Embedding interchange format and in-memory dataset model.

Binary container layout (all integers little-endian):

    magic   4 bytes  b"FSEB"
    version u16      currently 1
    hlen    u32      byte length of the JSON header
    header  UTF-8 JSON: {"dimension", "backbone", "layer", "normalized",
                         "count", ...optional extras (e.g. "cache")}
    records x count:
        u16 id length   + id bytes (UTF-8)
        u16 source len  + source bytes (UTF-8)
        u8  label       0 = real, 1 = fake
        dimension x f32 vector components

Vectors are stored at 32-bit precision; everything downstream computes in
float64. A read-write round trip is byte-exact.
"""

from __future__ import annotations

import enum
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagicError,
    CorruptRecordError,
    DimensionMismatchError,
    DuplicateIdError,
    MetadataMismatchError,
    NonFiniteError,
    NotNormalizedError,
    VersionUnsupportedError,
    ZeroVectorError,
)

MAGIC = b"FSEB"
FORMAT_VERSION = 1

REAL_SOURCE = "real"

ZERO_NORM_FLOOR = 1e-12
UNIT_NORM_TOL = 1e-5


class Label(enum.IntEnum):
    REAL = 0
    FAKE = 1

    @classmethod
    def from_name(cls, name: str) -> "Label":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown label {name!r}") from None

    @property
    def display(self) -> str:
        return self.name.lower()


def l2_normalize(vector: np.ndarray) -> np.ndarray:
    """Scale a vector to unit Euclidean norm (float64).

    Raises NonFiniteError on NaN/Inf components and ZeroVectorError when
    the norm is below 1e-12 (a zero embedding means the extractor failed).
    """
    v = np.asarray(vector, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("vector contains NaN or Inf")
    norm = float(np.linalg.norm(v))
    if norm < ZERO_NORM_FLOOR:
        raise ZeroVectorError(f"vector norm {norm:.3e} below {ZERO_NORM_FLOOR:.0e}")
    return v / norm


@dataclass
class EmbeddingRecord:
    """One image's feature vector with identity, source, and label.

    Real records carry the reserved source "real"; fake records carry the
    generator name that produced them.
    """

    id: str
    source: str
    label: Label
    vector: np.ndarray


@dataclass
class EmbeddingSet:
    """Ordered, immutable-by-convention collection of embedding records."""

    dimension: int
    backbone: str
    layer: int
    normalized: bool
    records: list[EmbeddingRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def vectors(self) -> np.ndarray:
        """Records stacked into an N x D float64 matrix."""
        if not self.records:
            return np.zeros((0, self.dimension), dtype=np.float64)
        return np.vstack([r.vector for r in self.records]).astype(np.float64)

    def labels(self) -> np.ndarray:
        return np.array([int(r.label) for r in self.records], dtype=np.int64)

    def sources(self) -> list[str]:
        return [r.source for r in self.records]

    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def fake_sources(self) -> list[str]:
        return sorted({r.source for r in self.records if r.label == Label.FAKE})

    def validate(self) -> None:
        """Enforce the set invariants; raises the specific error."""
        if self.dimension <= 0:
            raise DimensionMismatchError(f"dimension must be positive, got {self.dimension}")
        seen: set[str] = set()
        for i, rec in enumerate(self.records):
            _validate_record(rec, self.dimension, self.normalized, i)
            if rec.id in seen:
                raise DuplicateIdError(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)


def _validate_record(rec: EmbeddingRecord, dimension: int, normalized: bool, index: int) -> None:
    v = np.asarray(rec.vector, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != dimension:
        raise CorruptRecordError(index, f"vector length {v.shape} != declared dimension {dimension}")
    if not np.all(np.isfinite(v)):
        raise CorruptRecordError(index, "vector contains NaN or Inf")
    if rec.label == Label.REAL and rec.source != REAL_SOURCE:
        raise CorruptRecordError(index, f"real record has source {rec.source!r}")
    if rec.label == Label.FAKE and rec.source == REAL_SOURCE:
        raise CorruptRecordError(index, "fake record has reserved source 'real'")
    if normalized:
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise CorruptRecordError(index, f"declared normalized but norm is {norm:.8f}")


def normalize_set(emb: EmbeddingSet) -> EmbeddingSet:
    """New set with every vector l2-normalized and the flag raised."""
    records = [
        EmbeddingRecord(r.id, r.source, r.label, l2_normalize(r.vector)) for r in emb.records
    ]
    return EmbeddingSet(emb.dimension, emb.backbone, emb.layer, True, records)


class _Reader:
    """Streaming byte cursor that converts underruns into indexed errors."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.record_index = -1  # -1 while inside the header

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            if self.record_index < 0:
                raise BadMagicError(f"file truncated inside {what}")
            raise CorruptRecordError(self.record_index, f"file truncated inside {what}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u16(self, what: str) -> int:
        return struct.unpack("<H", self.take(2, what))[0]


def read_embedding_file(path) -> EmbeddingSet:
    emb, _ = read_container(path)
    return emb


def read_container(path) -> tuple[EmbeddingSet, dict]:
    """Read and fully validate an embedding file; returns (set, raw header)."""
    with open(path, "rb") as fh:
        data = fh.read()
    rd = _Reader(data)

    magic = rd.take(4, "magic")
    if magic != MAGIC:
        raise BadMagicError(f"expected magic {MAGIC!r}, found {magic!r}")
    version = rd.u16("version")
    if version != FORMAT_VERSION:
        raise VersionUnsupportedError(f"format version {version} not supported (expected {FORMAT_VERSION})")
    hlen = struct.unpack("<I", rd.take(4, "header length"))[0]
    try:
        header = json.loads(rd.take(hlen, "header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BadMagicError(f"unreadable JSON header: {exc}") from exc
    for key in ("dimension", "backbone", "layer", "normalized", "count"):
        if key not in header:
            raise BadMagicError(f"header missing field {key!r}")
    dimension = int(header["dimension"])
    count = int(header["count"])
    if dimension <= 0:
        raise DimensionMismatchError(f"header dimension must be positive, got {dimension}")
    if count < 0:
        raise BadMagicError(f"header count must be nonnegative, got {count}")
    normalized = bool(header["normalized"])

    records: list[EmbeddingRecord] = []
    seen: set[str] = set()
    for i in range(count):
        rd.record_index = i
        id_len = rd.u16("id length")
        try:
            rec_id = rd.take(id_len, "id").decode("utf-8")
        except UnicodeDecodeError:
            raise CorruptRecordError(i, "id is not valid UTF-8") from None
        src_len = rd.u16("source length")
        try:
            source = rd.take(src_len, "source").decode("utf-8")
        except UnicodeDecodeError:
            raise CorruptRecordError(i, "source is not valid UTF-8") from None
        label_byte = rd.take(1, "label")[0]
        if label_byte not in (0, 1):
            raise CorruptRecordError(i, f"label byte must be 0 or 1, got {label_byte}")
        raw = rd.take(4 * dimension, "vector")
        vector = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        rec = EmbeddingRecord(rec_id, source, Label(label_byte), vector)
        _validate_record(rec, dimension, normalized, i)
        if rec_id in seen:
            raise CorruptRecordError(i, f"duplicate record id {rec_id!r}")
        seen.add(rec_id)
        records.append(rec)
    rd.record_index = count
    if rd.pos != len(data):
        raise CorruptRecordError(count, f"{len(data) - rd.pos} trailing bytes after last record")

    return EmbeddingSet(dimension, str(header["backbone"]), int(header["layer"]), normalized, records), header


def write_embedding_file(emb: EmbeddingSet, path, extra_header: dict | None = None) -> None:
    """Serialize a validated set; vectors are cast to little-endian f32."""
    emb.validate()
    header: dict = {
        "dimension": emb.dimension,
        "backbone": emb.backbone,
        "layer": emb.layer,
        "normalized": emb.normalized,
        "count": len(emb.records),
    }
    if extra_header:
        header.update(extra_header)
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    parts = [MAGIC, struct.pack("<H", FORMAT_VERSION), struct.pack("<I", len(header_bytes)), header_bytes]
    for rec in emb.records:
        id_bytes = rec.id.encode("utf-8")
        src_bytes = rec.source.encode("utf-8")
        if len(id_bytes) > 0xFFFF or len(src_bytes) > 0xFFFF:
            raise ValueError(f"id/source longer than 65535 bytes in record {rec.id!r}")
        parts.append(struct.pack("<H", len(id_bytes)))
        parts.append(id_bytes)
        parts.append(struct.pack("<H", len(src_bytes)))
        parts.append(src_bytes)
        parts.append(struct.pack("B", int(rec.label)))
        parts.append(np.asarray(rec.vector, dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def merge(sets: list[EmbeddingSet]) -> EmbeddingSet:
    """Pool several sets into one corpus; metadata must agree, ids unique.

    The normalized flag survives only if every input set carries it.
    """
    if not sets:
        raise ValueError("merge requires at least one set")
    first = sets[0]
    for other in sets[1:]:
        if (other.dimension, other.backbone, other.layer) != (first.dimension, first.backbone, first.layer):
            raise MetadataMismatchError(
                f"cannot merge (dimension={other.dimension}, backbone={other.backbone!r}, layer={other.layer}) "
                f"with (dimension={first.dimension}, backbone={first.backbone!r}, layer={first.layer})"
            )
    records: list[EmbeddingRecord] = []
    seen: set[str] = set()
    for s in sets:
        for rec in s.records:
            if rec.id in seen:
                raise DuplicateIdError(f"duplicate record id {rec.id!r} across merged sets")
            seen.add(rec.id)
            records.append(rec)
    return EmbeddingSet(first.dimension, first.backbone, first.layer, all(s.normalized for s in sets), records)


def check_unit_norm(vector: np.ndarray, what: str = "vector") -> None:
    """Raise NotNormalizedError unless the norm is within 1e-5 of 1."""
    norm = float(np.linalg.norm(np.asarray(vector, dtype=np.float64)))
    if not math.isfinite(norm) or abs(norm - 1.0) > UNIT_NORM_TOL:
        raise NotNormalizedError(f"{what} has norm {norm:.8f}, expected 1 within {UNIT_NORM_TOL:.0e}")
