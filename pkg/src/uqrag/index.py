"""Exact top-k cosine retrieval over chunk vectors, with binary persistence.

The corpus is a few thousand paragraphs, so a flat exact search is both fast
enough and fully deterministic: ties are broken by ascending chunk_id, which
keeps results stable across platforms.
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatchError,
    IndexBuildError,
    IndexFormatError,
    ModelMismatchError,
)

MAGIC = b"UQIX"
VERSION = 1


@dataclass(frozen=True)
class RetrievedItem:
    chunk_id: str
    score: float
    text: str


@dataclass(frozen=True)
class RetrievalResult:
    query_text: str
    items: tuple
    k_requested: int


class VectorIndex:
    """Immutable flat index: one unit vector per chunk, plus its metadata."""

    def __init__(self, chunk_ids, departments, texts, matrix, model_id):
        self._chunk_ids = list(chunk_ids)
        self._departments = list(departments)
        self._texts = list(texts)
        self._matrix = matrix
        self.model_id = model_id

    @property
    def count(self):
        return len(self._chunk_ids)

    @property
    def dimension(self):
        return int(self._matrix.shape[1]) if self.count else 0

    @property
    def departments(self):
        return sorted(set(self._departments))

    def entries(self):
        from .embed import Vector

        for i, chunk_id in enumerate(self._chunk_ids):
            yield chunk_id, self._departments[i], Vector(
                tuple(self._matrix[i].tolist()), self.model_id
            )

    def __eq__(self, other):
        if not isinstance(other, VectorIndex):
            return NotImplemented
        return (
            self._chunk_ids == other._chunk_ids
            and self._departments == other._departments
            and self._texts == other._texts
            and self.model_id == other.model_id
            and self._matrix.shape == other._matrix.shape
            and bool(np.array_equal(self._matrix, other._matrix))
        )


def build(chunks, vectors):
    """Build an index over aligned (chunk, vector) pairs."""
    chunks = list(chunks)
    vectors = list(vectors)
    if len(chunks) != len(vectors):
        raise IndexBuildError(
            f"length mismatch: {len(chunks)} chunks vs {len(vectors)} vectors"
        )
    if not chunks:
        return VectorIndex([], [], [], np.zeros((0, 0), dtype=np.float64), "")

    model_ids = {v.model_id for v in vectors}
    if len(model_ids) > 1:
        raise IndexBuildError(f"mixed vector model_ids: {sorted(model_ids)}")
    dims = {len(v.values) for v in vectors}
    if len(dims) > 1:
        raise IndexBuildError(f"mixed vector dimensions: {sorted(dims)}")

    seen = set()
    for chunk in chunks:
        if chunk.chunk_id in seen:
            raise IndexBuildError(f"duplicate chunk_id '{chunk.chunk_id}'")
        seen.add(chunk.chunk_id)

    matrix = np.array([v.values for v in vectors], dtype=np.float64)
    return VectorIndex(
        [c.chunk_id for c in chunks],
        [c.department for c in chunks],
        [c.text for c in chunks],
        matrix,
        model_ids.pop(),
    )


def top_k(index, query_vec, k, department=None, query_text=""):
    """The k highest-cosine entries, sorted by (score desc, chunk_id asc).

    With a department filter, only entries from that department compete; the
    search is exact, never approximate.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if index.count == 0:
        return RetrievalResult(query_text=query_text, items=(), k_requested=k)
    if query_vec.model_id != index.model_id:
        raise ModelMismatchError(
            f"query model '{query_vec.model_id}' does not match index model '{index.model_id}'"
        )
    if len(query_vec.values) != index.dimension:
        raise DimensionMismatchError(
            f"query dimension {len(query_vec.values)} does not match index dimension {index.dimension}"
        )

    query = np.asarray(query_vec.values, dtype=np.float64)
    # per-row dots (not a matvec): bit-identical to a brute-force oracle,
    # since blocked BLAS matvec accumulation can differ in the last ulp
    scores = np.clip([np.dot(row, query) for row in index._matrix], -1.0, 1.0)
    if department is None:
        candidates = range(index.count)
    else:
        candidates = [i for i in range(index.count) if index._departments[i] == department]
    ranked = sorted(candidates, key=lambda i: (-scores[i], index._chunk_ids[i]))[:k]
    items = tuple(
        RetrievedItem(index._chunk_ids[i], float(scores[i]), index._texts[i]) for i in ranked
    )
    return RetrievalResult(query_text=query_text, items=items, k_requested=k)


# File layout (all integers little-endian):
#   magic "UQIX" | u32 version | u32 header_len | header JSON
#   | count*dimension float64 vector block | u64 meta_len | meta JSON
# The header carries model_id/dimension/count; meta carries chunk_ids,
# departments and texts (texts must travel with the index so retrieval can
# hand prompt-ready paragraphs back without the original corpus file).


def save(index, path):
    header = json.dumps(
        {"model_id": index.model_id, "dimension": index.dimension, "count": index.count},
        ensure_ascii=False,
    ).encode("utf-8")
    meta = json.dumps(
        {
            "chunk_ids": index._chunk_ids,
            "departments": index._departments,
            "texts": index._texts,
        },
        ensure_ascii=False,
    ).encode("utf-8")
    vector_block = np.ascontiguousarray(index._matrix, dtype="<f8").tobytes()
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(vector_block)
        fh.write(struct.pack("<Q", len(meta)))
        fh.write(meta)


def load(path):
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise IndexFormatError(f"{path}: not an index file (bad magic {magic!r})")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise IndexFormatError(f"{path}: unsupported index version {version}")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        count, dimension = header["count"], header["dimension"]
        vector_bytes = fh.read(count * dimension * 8)
        if len(vector_bytes) != count * dimension * 8:
            raise IndexFormatError(f"{path}: truncated vector block")
        (meta_len,) = struct.unpack("<Q", fh.read(8))
        meta = json.loads(fh.read(meta_len).decode("utf-8"))
    matrix = np.frombuffer(vector_bytes, dtype="<f8").reshape(count, dimension).copy()
    if not (len(meta["chunk_ids"]) == len(meta["departments"]) == len(meta["texts"]) == count):
        raise IndexFormatError(f"{path}: metadata length does not match header count")
    return VectorIndex(
        meta["chunk_ids"], meta["departments"], meta["texts"], matrix, header["model_id"]
    )
