"""Expert-knowledge vector store: threshold-filtered top-k retrieval with caching.

The embedding backend is an abstract interface; the deterministic hash
embedder ships for tests and scripted runs. Similarity is cosine over the
stored embeddings, computed as the dot product of L2-normalized copies.
Results below the similarity threshold are dropped before top-k truncation.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence


class KbError(ValueError):
    pass


@dataclass(frozen=True)
class KbDocument:
    doc_id: str
    text: str
    embedding: tuple[float, ...]
    citation: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise KbError("doc_id must be nonempty")
        if not self.citation:
            raise KbError(f"{self.doc_id}: citation must be nonempty")


@dataclass(frozen=True)
class RetrievalResult:
    document: KbDocument
    similarity: float


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> list[float]: ...


_TOKEN_RE = re.compile(r"[a-z0-9@#+]+")


class HashEmbedder:
    """Deterministic bag-of-hashed-tokens embedder for tests and scripted runs.

    Identical texts embed identically (self-similarity 1.0); texts sharing
    tokens land nearby. No model weights involved.
    """

    def __init__(self, dim: int = 32):
        self.dim = dim

    def embed(self, text: str) -> list[float]:
        vec = [0.0] * self.dim
        for token in _TOKEN_RE.findall(text.lower()):
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            idx = digest[0] % self.dim
            sign = 1.0 if digest[1] % 2 == 0 else -1.0
            vec[idx] += sign
        if not any(vec):
            digest = hashlib.sha256(text.encode("utf-8")).digest()
            vec[digest[0] % self.dim] = 1.0
        return vec


@dataclass(frozen=True)
class VectorStore:
    """Immutable embedding store; version keys the retrieval cache."""

    dim: int
    documents: tuple[KbDocument, ...]
    version: str

    def __len__(self) -> int:
        return len(self.documents)


def _content_version(documents: Sequence[KbDocument]) -> str:
    h = hashlib.sha256()
    for doc in sorted(documents, key=lambda d: d.doc_id):
        h.update(doc.doc_id.encode("utf-8"))
        h.update(b"\x00")
        h.update(doc.text.encode("utf-8"))
        h.update(b"\x01")
    return h.hexdigest()[:16]


def ingest_documents(
    docs: Iterable[dict | KbDocument], embedder: Embedder
) -> VectorStore:
    """Embed and store documents, deduplicating by doc_id.

    A repeated doc_id with identical text is stored once; with different
    text it is an error.
    """
    stored: dict[str, KbDocument] = {}
    for item in docs:
        if isinstance(item, KbDocument):
            doc = item
        else:
            doc = KbDocument(
                doc_id=str(item["doc_id"]),
                text=str(item["text"]),
                embedding=tuple(embedder.embed(str(item["text"]))),
                citation=dict(item.get("citation") or {}),
            )
        existing = stored.get(doc.doc_id)
        if existing is not None:
            if existing.text != doc.text:
                raise KbError(f"duplicate doc_id {doc.doc_id!r} with different text")
            continue
        if len(doc.embedding) != embedder.dim:
            raise KbError(
                f"{doc.doc_id}: embedding dim {len(doc.embedding)} != store dim {embedder.dim}"
            )
        stored[doc.doc_id] = doc
    documents = tuple(stored[k] for k in sorted(stored))
    return VectorStore(
        dim=embedder.dim, documents=documents, version=_content_version(documents)
    )


def _cosine(u: Sequence[float], v: Sequence[float]) -> float:
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    if nu == 0.0 or nv == 0.0:
        raise KbError("cosine similarity undefined for zero vector")
    if tuple(u) == tuple(v):
        return 1.0  # self-similarity is exact, not subject to rounding
    dot = sum(a * b for a, b in zip(u, v))
    return max(-1.0, min(1.0, dot / (nu * nv)))


def retrieve(
    query_embedding: Sequence[float],
    store: VectorStore,
    threshold: float = 0.90,
    k: int = 2,
) -> list[RetrievalResult]:
    """Top-k documents with cosine similarity at or above the threshold.

    Sorted by similarity descending; exact ties break by doc_id.
    """
    if len(query_embedding) != store.dim:
        raise KbError(
            f"query dim {len(query_embedding)} != store dim {store.dim}"
        )
    hits = []
    for doc in store.documents:
        sim = _cosine(query_embedding, doc.embedding)
        if sim >= threshold:
            hits.append(RetrievalResult(document=doc, similarity=sim))
    hits.sort(key=lambda r: (-r.similarity, r.document.doc_id))
    return hits[: max(k, 0)]


@dataclass
class CacheStats:
    hits: int = 0
    misses: int = 0


class RetrievalCache:
    """Insert-if-absent result cache keyed by (query, threshold, k, store)."""

    def __init__(self) -> None:
        self._entries: dict[tuple, tuple[RetrievalResult, ...]] = {}
        self._lock = threading.Lock()
        self.stats = CacheStats()

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()

    def get_or_compute(self, key: tuple, compute) -> list[RetrievalResult]:
        with self._lock:
            cached = self._entries.get(key)
            if cached is not None:
                self.stats.hits += 1
                return list(cached)
        result = tuple(compute())
        with self._lock:
            stored = self._entries.setdefault(key, result)
            self.stats.misses += 1
        return list(stored)


def cached_retrieve(
    query_key: str,
    query_embedding: Sequence[float],
    store: VectorStore,
    cache: RetrievalCache,
    threshold: float = 0.90,
    k: int = 2,
) -> list[RetrievalResult]:
    """retrieve() through the cache; hits skip recomputation entirely."""
    key = (query_key, threshold, k, store.version)
    return cache.get_or_compute(
        key, lambda: retrieve(query_embedding, store, threshold=threshold, k=k)
    )


def load_kb_file(path: str | Path) -> list[dict]:
    """Read a knowledge-base source file (JSON Lines)."""
    docs = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            docs.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise KbError(f"{path}:{line_no}: bad JSON: {exc}") from exc
    return docs
