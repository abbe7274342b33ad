"""Embedding backends, unit vectors, cosine similarity, and a content cache.

All vectors are L2-normalized at ingestion so cosine similarity reduces to a
dot product everywhere downstream.
"""

import hashlib
import json
import logging
import os
import threading
import unicodedata
from dataclasses import dataclass
from pathlib import Path

import httpx
import numpy as np

from .errors import (
    DimensionMismatchError,
    EmbeddingBackendError,
    ModelMismatchError,
    ZeroVectorError,
)
from .retry import RetryPolicy, request_with_retries

logger = logging.getLogger(__name__)

API_KEY_ENV = "UQRAG_API_KEY"

NORM_TOLERANCE = 1e-6
_ZERO_NORM_EPS = 1e-12


@dataclass(frozen=True)
class Vector:
    """A unit-length embedding tagged with the model that produced it."""

    values: tuple
    model_id: str

    def __post_init__(self):
        if len(self.values) < 1:
            raise ValueError("vector must have at least one component")
        norm = float(np.linalg.norm(self.values))
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise ZeroVectorError(
                f"vector norm {norm!r} is not unit length (model '{self.model_id}')"
            )

    @property
    def dimension(self):
        return len(self.values)


def unit_vector(values, model_id):
    """Normalize raw backend output into a Vector; zero vectors are rejected."""
    arr = np.asarray(values, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if norm < _ZERO_NORM_EPS:
        raise ZeroVectorError(f"embedding collapsed to the zero vector (model '{model_id}')")
    return Vector(tuple((arr / norm).tolist()), model_id)


def cosine(u, v):
    """Cosine similarity of two unit vectors, clamped to [-1, 1]."""
    if u.model_id != v.model_id:
        raise ModelMismatchError(f"cannot compare '{u.model_id}' with '{v.model_id}' vectors")
    if len(u.values) != len(v.values):
        raise DimensionMismatchError(
            f"dimension mismatch: {len(u.values)} vs {len(v.values)}"
        )
    dot = float(np.dot(u.values, v.values))
    return min(1.0, max(-1.0, dot))


def _nfc(text):
    return unicodedata.normalize("NFC", text)


def text_hash(text):
    return hashlib.sha256(_nfc(text).encode("utf-8")).hexdigest()


def mock_embed(seed, text, dimension, model_id="mock-embedder"):
    """Deterministic unit vector derived from a keyed hash of (seed, text)."""
    if dimension < 2:
        raise ValueError("dimension must be >= 2")
    digest = hashlib.sha256(f"{seed}\x1f{_nfc(text)}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:16], "little"))
    values = rng.standard_normal(dimension)
    return unit_vector(values, model_id)


class EmbeddingCache:
    """Content-addressed cache keyed by (model_id, sha256 of NFC text).

    When a path is given, entries are persisted as append-only JSONL records
    that round-trip float values exactly.
    """

    def __init__(self, path=None):
        self._entries = {}
        self._lock = threading.Lock()
        self.path = Path(path) if path else None
        if self.path and self.path.exists():
            self._load()

    def _load(self):
        with self.path.open("r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                raw = json.loads(line)
                key = (raw["model_id"], raw["text_hash"])
                self._entries[key] = Vector(tuple(raw["values"]), raw["model_id"])

    def get(self, model_id, text):
        with self._lock:
            return self._entries.get((model_id, text_hash(text)))

    def put(self, model_id, text, vector):
        key = (model_id, text_hash(text))
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = vector
            if self.path:
                record = {
                    "model_id": model_id,
                    "text_hash": key[1],
                    "values": list(vector.values),
                }
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    def __len__(self):
        with self._lock:
            return len(self._entries)


class MockEmbeddingBackend:
    """Hash-seeded deterministic backend for offline runs and tests."""

    kind = "mock"

    def __init__(self, model_id="mock-embedder", dimension=64, seed=0, max_batch=16):
        if dimension < 2:
            raise ValueError("dimension must be >= 2")
        if max_batch < 1:
            raise ValueError("max_batch must be >= 1")
        self.model_id = model_id
        self.dimension = dimension
        self.seed = seed
        self.max_batch = max_batch
        self.batch_sizes = []
        self._lock = threading.Lock()

    def embed_batch(self, texts):
        with self._lock:
            self.batch_sizes.append(len(texts))
        return [
            list(mock_embed(self.seed, t, self.dimension, self.model_id).values)
            for t in texts
        ]


class HttpEmbeddingBackend:
    """Client for the de-facto standard embeddings wire protocol."""

    kind = "http"

    def __init__(
        self,
        endpoint,
        model_id,
        dimension,
        timeout=30.0,
        max_batch=16,
        retry=RetryPolicy(),
    ):
        if dimension < 2:
            raise ValueError("dimension must be >= 2")
        if max_batch < 1:
            raise ValueError("max_batch must be >= 1")
        self.endpoint = endpoint.rstrip("/")
        self.model_id = model_id
        self.dimension = dimension
        self.max_batch = max_batch
        self.retry = retry
        self._client = httpx.Client(timeout=timeout)

    def _headers(self):
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(API_KEY_ENV)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def embed_batch(self, texts):
        payload = {"model": self.model_id, "input": list(texts)}
        response = request_with_retries(
            lambda: self._client.post(
                f"{self.endpoint}/embeddings", json=payload, headers=self._headers()
            ),
            self.retry,
            EmbeddingBackendError,
        )
        body = response.json()
        try:
            data = sorted(body["data"], key=lambda item: item["index"])
            return [item["embedding"] for item in data]
        except (KeyError, TypeError):
            raise EmbeddingBackendError(f"malformed embeddings response: {str(body)[:200]}")


def _batches(items, size):
    for start in range(0, len(items), size):
        yield items[start : start + size]


def embed_texts(backend, texts, cache=None):
    """Embed texts into unit vectors, order-preserving.

    The cache is consulted before the backend; cache misses are deduplicated
    and sent in batches of at most ``backend.max_batch``.
    """
    for text in texts:
        if not isinstance(text, str) or not text.strip():
            raise ValueError("every text to embed must be a nonempty string")

    resolved = {}
    pending = []
    for text in texts:
        key = _nfc(text)
        if key in resolved or key in pending:
            continue
        hit = cache.get(backend.model_id, text) if cache is not None else None
        if hit is not None:
            resolved[key] = hit
        else:
            pending.append(key)

    for batch in _batches(pending, backend.max_batch):
        rows = backend.embed_batch(batch)
        if len(rows) != len(batch):
            raise EmbeddingBackendError(
                f"backend returned {len(rows)} vectors for {len(batch)} texts"
            )
        for text, row in zip(batch, rows):
            if len(row) != backend.dimension:
                raise DimensionMismatchError(
                    f"backend returned {len(row)} dims, configured {backend.dimension}"
                )
            vector = unit_vector(row, backend.model_id)
            resolved[text] = vector
            if cache is not None:
                cache.put(backend.model_id, text, vector)

    return [resolved[_nfc(text)] for text in texts]
