"""Knowledge base over (optionally summary-augmented) chunks.

Dense search is an exact cosine scan, sparse search is Okapi BM25, and the
hybrid mode is a weighted sum of per-query min-max normalized scores. All
rankings break ties by ``(doc_id, span.start)`` so results are fully
deterministic and top-k is always a prefix of top-(k+1).
"""
from __future__ import annotations

import json
import logging
import math
import re
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .chunking import Chunk
from .corpus import Span
from .embedding import EmbeddingProvider, EmbeddingProviderConfig, embed_batch, make_provider
from .errors import IndexFormatError, SacError
from .summarization import Summary
from ._io import atomic_write_bytes, atomic_write_text

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
SUMMARY_SEPARATOR = "\n\n"
NEAR_TIE = 1e-9  # far above float64 summation error for any realistic dimension
_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on anything that is not a letter or digit."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.5
    b: float = 0.75

    def __post_init__(self):
        if self.k1 <= 0 or not 0 <= self.b <= 1:
            raise ValueError("need k1 > 0 and 0 <= b <= 1")


@dataclass(frozen=True)
class HybridWeights:
    w_semantic: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.w_semantic <= 1.0:
            raise ValueError("w_semantic must lie in [0, 1]")

    @property
    def w_keyword(self) -> float:
        return 1.0 - self.w_semantic


@dataclass(frozen=True)
class IndexedChunk:
    chunk: Chunk
    augmented_text: str
    row: int

    @property
    def doc_id(self) -> str:
        return self.chunk.doc_id

    @property
    def span(self) -> Span:
        return self.chunk.span


@dataclass
class SearchResult:
    ranked: list[tuple[IndexedChunk, float]]
    k: int

    def __len__(self) -> int:
        return len(self.ranked)

    def prefix(self, k: int) -> "SearchResult":
        return SearchResult(self.ranked[:k], k)

    @property
    def chunks(self) -> list[IndexedChunk]:
        return [c for c, _ in self.ranked]


@dataclass
class _Bm25Stats:
    postings: dict[str, list[tuple[int, int]]]
    doc_lengths: np.ndarray
    avgdl: float

    @property
    def n(self) -> int:
        return int(self.doc_lengths.shape[0])

    @property
    def df(self) -> dict[str, int]:
        return {t: len(p) for t, p in self.postings.items()}


def _bm25_stats(texts: list[str]) -> _Bm25Stats:
    postings: dict[str, list[tuple[int, int]]] = {}
    lengths = np.zeros(len(texts), dtype=np.float64)
    for row, text in enumerate(texts):
        tokens = tokenize(text)
        lengths[row] = len(tokens)
        for term, tf in Counter(tokens).items():
            postings.setdefault(term, []).append((row, tf))
    avgdl = float(lengths.mean()) if len(texts) else 0.0
    return _Bm25Stats(dict(sorted(postings.items())), lengths, avgdl)


@dataclass
class Index:
    chunks: list[IndexedChunk]
    vectors: np.ndarray  # float32, row i belongs to chunks[i]
    provider: EmbeddingProvider | None
    bm25_params: Bm25Params = field(default_factory=Bm25Params)
    bm25: _Bm25Stats | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.chunks):
            raise SacError("vector matrix does not match chunk count")
        self._mat = self.vectors.astype(np.float64)
        # float32 products are exact in float64; fsum makes the norms correctly rounded
        self._norms = np.array([math.sqrt(math.fsum((row * row).tolist())) for row in self._mat])
        if len(self.chunks):
            _, self._dup = np.unique(self._mat, axis=0, return_inverse=True)
            self._dup = self._dup.reshape(-1)
        else:
            self._dup = np.zeros(0, dtype=np.int64)
        order = sorted(range(len(self.chunks)), key=lambda i: (self.chunks[i].doc_id, self.chunks[i].span.start))
        self._tiebreak = np.empty(len(self.chunks), dtype=np.int64)
        self._tiebreak[order] = np.arange(len(self.chunks))
        if self.bm25 is None:
            self.bm25 = _bm25_stats([self._sparse_text(c) for c in self.chunks])

    def _sparse_text(self, c: IndexedChunk) -> str:
        return c.augmented_text if self.meta.get("sparse_on_augmented", True) else c.chunk.text

    def __len__(self) -> int:
        return len(self.chunks)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    # scoring -------------------------------------------------------------

    def embed_query(self, query: str) -> np.ndarray:
        if self.provider is None:
            raise SacError("index has no embedding provider attached")
        vec = embed_batch([query], self.provider)[0]
        if vec.dim != self.dim:
            raise SacError(f"query embedding dim {vec.dim} != index dim {self.dim}")
        return vec.values.astype(np.float32).astype(np.float64)

    def dense_scores(self, query: str) -> np.ndarray:
        if not self.chunks:
            return np.zeros(0)
        q = self.embed_query(query)
        q_norm = math.sqrt(math.fsum((q * q).tolist()))
        dots = self._mat @ q
        denom = self._norms * q_norm
        scores = np.zeros(len(self.chunks))
        ok = denom > 0
        scores[ok] = dots[ok] / denom[ok]
        self._settle_near_ties(scores, q, q_norm)
        return np.clip(scores, -1.0, 1.0) + 0.0

    def _settle_near_ties(self, scores: np.ndarray, q: np.ndarray, q_norm: float) -> None:
        """Recompute scores lying within NEAR_TIE of a neighbour with exact summation.

        Distinct chunks often have mathematically equal cosines (hash vectors
        hold small integer counts). Summation order would otherwise split
        such ties by rounding noise instead of by (doc_id, span.start).
        """
        if len(scores) < 2 or q_norm == 0.0:
            return
        order = np.argsort(scores, kind="stable")
        close = np.diff(scores[order]) <= NEAR_TIE
        if not close.any():
            return
        flag = np.zeros(len(scores), dtype=bool)
        flag[:-1] |= close
        flag[1:] |= close
        exact: dict[int, float] = {}
        for r in order[flag]:
            key = int(self._dup[r])
            if key not in exact:
                denom = self._norms[r] * q_norm
                exact[key] = math.fsum((self._mat[r] * q).tolist()) / denom if denom > 0 else 0.0
            scores[r] = exact[key]

    def bm25_scores(self, query: str) -> np.ndarray:
        stats = self.bm25
        scores = np.zeros(stats.n)
        if stats.n == 0 or stats.avgdl == 0:
            return scores
        k1, b = self.bm25_params.k1, self.bm25_params.b
        norm = k1 * (1.0 - b + b * stats.doc_lengths / stats.avgdl)
        for term in tokenize(query):
            posting = stats.postings.get(term)
            if not posting:
                continue
            df = len(posting)
            idf = math.log((stats.n - df + 0.5) / (df + 0.5) + 1.0)
            rows = np.fromiter((r for r, _ in posting), dtype=np.int64, count=df)
            tf = np.fromiter((t for _, t in posting), dtype=np.float64, count=df)
            scores[rows] += idf * (tf * (k1 + 1.0) / (tf + norm[rows]))
        return scores

    def rank(self, scores: np.ndarray, k: int, rows: np.ndarray | None = None) -> list[int]:
        """Row ids of the best `k` scores, ties broken by (doc_id, span.start)."""
        if rows is None:
            rows = np.arange(len(scores))
            sub = scores
        else:
            sub = scores[rows]
        order = np.lexsort((self._tiebreak[rows], -sub))
        return [int(rows[i]) for i in order[:k]]

    def _result(self, rows: list[int], scores: np.ndarray, k: int) -> SearchResult:
        return SearchResult([(self.chunks[r], float(scores[r])) for r in rows], k)

    # public search API ---------------------------------------------------

    def dense_search(self, query: str, k: int) -> SearchResult:
        _check_k(k)
        if not self.chunks:
            return SearchResult([], k)
        scores = self.dense_scores(query)
        return self._result(self.rank(scores, k), scores, k)

    def bm25_search(self, query: str, k: int) -> SearchResult:
        _check_k(k)
        if not self.chunks:
            return SearchResult([], k)
        scores = self.bm25_scores(query)
        return self._result(self.rank(scores, k), scores, k)

    def hybrid_search(self, query: str, k: int, weights: HybridWeights, pool: int = 128) -> SearchResult:
        _check_k(k)
        if pool < k:
            raise ValueError("pool must be >= k")
        if not self.chunks:
            return SearchResult([], k)
        dense = self.dense_scores(query)
        sparse = self.bm25_scores(query)
        union = np.array(sorted(set(self.rank(dense, pool)) | set(self.rank(sparse, pool))), dtype=np.int64)
        fused = np.zeros(len(self.chunks))
        fused[union] = (weights.w_semantic * min_max(dense[union])
                        + weights.w_keyword * min_max(sparse[union]))
        return self._result(self.rank(fused, k, rows=union), fused, k)

    def search(self, query: str, k: int, weights: HybridWeights | None = None, pool: int = 128) -> SearchResult:
        if weights is None:
            return self.dense_search(query, k)
        return self.hybrid_search(query, k, weights, pool)


def min_max(values: np.ndarray) -> np.ndarray:
    """Scale to [0, 1]; a constant list maps to 0.5."""
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.full(values.shape, 0.5)
    return (values - lo) / (hi - lo)


def _check_k(k: int):
    if k < 1:
        raise ValueError("k must be >= 1")


def augment(chunk: Chunk, summary: Summary | None) -> str:
    return chunk.text if summary is None else summary.text + SUMMARY_SEPARATOR + chunk.text


def build_index(chunks: list[Chunk], summaries: dict[str, Summary] | None, provider: EmbeddingProvider,
                bm25: Bm25Params = Bm25Params(), *, sparse_on_augmented: bool = True,
                provider_config: EmbeddingProviderConfig | None = None) -> Index:
    if summaries is not None:
        missing = sorted({c.doc_id for c in chunks} - set(summaries))
        if missing:
            raise SacError("no summary for document(s): " + ", ".join(missing))
    indexed = [IndexedChunk(c, augment(c, summaries[c.doc_id] if summaries is not None else None), row)
               for row, c in enumerate(chunks)]
    vectors = embed_batch([ic.augmented_text for ic in indexed], provider)
    dim = vectors[0].dim if vectors else (provider_config.dim if provider_config else 0)
    matrix = np.array([v.values for v in vectors], dtype=np.float32).reshape(len(vectors), dim)
    strategies = sorted({s.strategy for s in summaries.values()}) if summaries else []
    meta = {
        "sac": summaries is not None,
        "summary_strategy": strategies[0] if len(strategies) == 1 else (strategies or None),
        "sparse_on_augmented": sparse_on_augmented,
        "provider_fingerprint": getattr(provider, "fingerprint", None),
        "provider": asdict(provider_config) if provider_config else None,
    }
    logger.info("built index: %d chunks, dim %d, sac=%s", len(indexed), dim, meta["sac"])
    return Index(indexed, matrix, provider, bm25, meta=meta)


def save_index(index: Index, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stats = index.bm25
    manifest = {
        "format_version": FORMAT_VERSION,
        "dim": index.dim,
        "n_chunks": len(index),
        "n_terms": len(stats.postings),
        "bm25": asdict(index.bm25_params),
        **index.meta,
    }
    lines = [
        json.dumps({"doc_id": ic.doc_id, "span": ic.span.as_list(), "text": ic.chunk.text,
                    "augmented_text": ic.augmented_text}, ensure_ascii=False)
        for ic in index.chunks
    ]
    postings = {
        "postings": {t: [list(p) for p in ps] for t, ps in stats.postings.items()},
        "df": stats.df,
        "avgdl": stats.avgdl,
        "doc_lengths": [int(x) for x in stats.doc_lengths],
    }
    atomic_write_bytes(directory / "vectors.f32", index.vectors.astype("<f4").tobytes())
    atomic_write_text(directory / "chunks.jsonl", "".join(line + "\n" for line in lines))
    atomic_write_text(directory / "postings.json", json.dumps(postings, ensure_ascii=False))
    # manifest last: its presence marks a complete index
    atomic_write_text(directory / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True))


def load_index(directory: str | Path, provider: EmbeddingProvider | None = None) -> Index:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise IndexFormatError(f"{directory}: no manifest.json")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise IndexFormatError(f"{directory}: unsupported format_version {version!r} (expected {FORMAT_VERSION})")
    n, dim = int(manifest["n_chunks"]), int(manifest["dim"])

    raw = (directory / "vectors.f32").read_bytes()
    expected = n * dim * 4
    if len(raw) != expected:
        raise IndexFormatError(f"{directory}/vectors.f32: expected {expected} bytes, found {len(raw)}")
    vectors = np.frombuffer(raw, dtype="<f4").reshape(n, dim)

    chunks = []
    with open(directory / "chunks.jsonl", encoding="utf-8") as fh:
        for row, line in enumerate(fh):
            rec = json.loads(line)
            chunk = Chunk(rec["doc_id"], Span(*rec["span"]), rec["text"])
            chunks.append(IndexedChunk(chunk, rec["augmented_text"], row))
    if len(chunks) != n:
        raise IndexFormatError(f"{directory}/chunks.jsonl: expected {n} records, found {len(chunks)}")

    post = json.loads((directory / "postings.json").read_text(encoding="utf-8"))
    stats = _Bm25Stats({t: [tuple(p) for p in ps] for t, ps in post["postings"].items()},
                       np.array(post["doc_lengths"], dtype=np.float64), float(post["avgdl"]))

    if provider is None and manifest.get("provider"):
        provider = make_provider(EmbeddingProviderConfig(**manifest["provider"]))
    if provider is not None and manifest.get("provider_fingerprint") not in (None, provider.fingerprint):
        raise IndexFormatError(f"index was built with {manifest['provider_fingerprint']}, "
                               f"got provider {provider.fingerprint}")
    meta = {k: manifest.get(k) for k in ("sac", "summary_strategy", "sparse_on_augmented",
                                         "provider_fingerprint", "provider")}
    return Index(chunks, vectors, provider, Bm25Params(**manifest["bm25"]), stats, meta)
