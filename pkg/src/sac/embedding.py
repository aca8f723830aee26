"""Text embedders: a deterministic feature-hashing embedder and a remote HTTP provider."""
from __future__ import annotations

import hashlib
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path
from typing import Literal, Protocol

import numpy as np

from .errors import BackendError, ConfigError, SacError
from ._http import JsonPoster
from ._io import atomic_write_bytes

logger = logging.getLogger(__name__)

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


@dataclass(frozen=True, eq=False)
class Vector:
    values: np.ndarray
    flagged: bool = False  # set when the vector is all-zero (nothing to embed)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other):
        return isinstance(other, Vector) and np.array_equal(self.values, other.values)

    __hash__ = None


def normalize(values) -> Vector:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("vector must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector has non-finite entries")
    norm = float(np.sqrt(np.dot(arr, arr)))
    if norm == 0.0:
        return Vector(np.zeros_like(arr), flagged=True)
    return Vector(arr / norm)


def cosine(a, b) -> float:
    """Cosine similarity; 0.0 when either side is the zero vector."""
    a = a.values if isinstance(a, Vector) else np.asarray(a, dtype=np.float64)
    b = b.values if isinstance(b, Vector) else np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return max(-1.0, min(1.0, float(np.dot(a, b)) / (na * nb)))


@lru_cache(maxsize=1 << 18)
def _bucket(gram: str, dim: int) -> tuple[int, float]:
    h = fnv1a_64(gram.encode("utf-8"))
    # low bits pick the bucket, the top bit picks the sign
    return h % dim, (-1.0 if h >> 63 else 1.0)


def hash_embed(text: str, dim: int = 256, ngram: int = 3) -> Vector:
    """Signed feature hashing of lowercased character n-grams, L2-normalized."""
    if dim < 8:
        raise ValueError("dim must be >= 8")
    if ngram < 1:
        raise ValueError("ngram must be >= 1")
    text = text.lower()
    values = np.zeros(dim, dtype=np.float64)
    for i in range(len(text) - ngram + 1):
        idx, sign = _bucket(text[i:i + ngram], dim)
        values[idx] += sign
    return normalize(values)


@dataclass(frozen=True)
class EmbeddingProviderConfig:
    kind: Literal["remote", "hash"] = "hash"
    model_id: str = ""
    dim: int = 256
    ngram: int = 3
    batch_size: int = 64
    base_url: str = ""
    concurrency: int = 4

    def __post_init__(self):
        if self.kind not in ("remote", "hash"):
            raise ConfigError(f"unknown provider kind {self.kind!r}")
        if self.dim < 8 or self.ngram < 1 or self.batch_size < 1:
            raise ConfigError("need dim >= 8, ngram >= 1, batch_size >= 1")
        if self.kind == "remote" and not (self.model_id and self.base_url):
            raise ConfigError("remote provider needs model_id and base_url")


class EmbeddingProvider(Protocol):
    fingerprint: str

    def embed(self, texts: list[str]) -> list[Vector]: ...


class HashEmbedder:
    def __init__(self, dim: int = 256, ngram: int = 3):
        if dim < 8:
            raise ValueError("dim must be >= 8")
        self.dim = dim
        self.ngram = ngram
        self.fingerprint = f"hash-fnv1a64-d{dim}-n{ngram}"

    def embed(self, texts: list[str]) -> list[Vector]:
        return [hash_embed(t, self.dim, self.ngram) for t in texts]


class RemoteEmbedder:
    """Client for ``POST <base>/v1/embeddings`` servers."""

    def __init__(self, base_url: str, model_id: str, api_key: str | None = None, *,
                 batch_size: int = 64, concurrency: int = 4, **poster_kwargs):
        if api_key is None:
            api_key = os.environ.get("SAC_EMBED_API_KEY")
        self.model_id = model_id
        self.batch_size = batch_size
        self.concurrency = concurrency
        self.fingerprint = f"remote-{model_id}"
        self._poster = JsonPoster(base_url, api_key, **poster_kwargs)

    def _embed_one_batch(self, batch_no: int, batch: list[str]) -> list[Vector]:
        try:
            data = self._poster.post("/v1/embeddings", {"model": self.model_id, "input": batch})
            rows = [item["embedding"] for item in data["data"]]
        except BackendError as exc:
            raise BackendError(f"embedding batch {batch_no} ({len(batch)} texts) failed: {exc}") from exc
        except (KeyError, TypeError) as exc:
            raise BackendError(f"embedding batch {batch_no}: malformed response") from exc
        if len(rows) != len(batch):
            raise BackendError(f"embedding batch {batch_no}: got {len(rows)} vectors for {len(batch)} texts")
        if len({len(r) for r in rows}) > 1:
            raise SacError(f"embedding batch {batch_no}: dimension mismatch within batch")
        return [normalize(r) for r in rows]

    def embed(self, texts: list[str]) -> list[Vector]:
        batches = [texts[i:i + self.batch_size] for i in range(0, len(texts), self.batch_size)]
        with ThreadPoolExecutor(max_workers=max(1, self.concurrency)) as pool:
            parts = list(pool.map(self._embed_one_batch, range(len(batches)), batches))
        out = [v for part in parts for v in part]
        if out and len({v.dim for v in out}) > 1:
            raise SacError("embedding dimension changed between batches")
        return out


class CachedEmbedder:
    """Content-addressed on-disk cache in front of another provider."""

    def __init__(self, provider: EmbeddingProvider, root: str | Path):
        self.provider = provider
        self.fingerprint = provider.fingerprint
        key = hashlib.sha256(provider.fingerprint.encode("utf-8")).hexdigest()[:16]
        self.root = Path(root) / key

    def _path(self, text: str) -> Path:
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        return self.root / digest[:2] / f"{digest}.f64"

    def embed(self, texts: list[str]) -> list[Vector]:
        out: list[Vector | None] = [None] * len(texts)
        missing: dict[str, list[int]] = {}
        for i, text in enumerate(texts):
            path = self._path(text)
            if path.exists():
                values = np.frombuffer(path.read_bytes(), dtype="<f8").astype(np.float64)
                out[i] = Vector(values, flagged=not values.any())
            else:
                missing.setdefault(text, []).append(i)
        if missing:
            uniq = list(missing)
            for text, vec in zip(uniq, self.provider.embed(uniq)):
                atomic_write_bytes(self._path(text), vec.values.astype("<f8").tobytes())
                for i in missing[text]:
                    out[i] = vec
        return out  # type: ignore[return-value]


def make_provider(config: EmbeddingProviderConfig, api_key: str | None = None, **kwargs) -> EmbeddingProvider:
    if config.kind == "hash":
        return HashEmbedder(config.dim, config.ngram)
    return RemoteEmbedder(config.base_url, config.model_id, api_key,
                          batch_size=config.batch_size, concurrency=config.concurrency, **kwargs)


def provider_manifest(config: EmbeddingProviderConfig) -> dict:
    return asdict(config)


def embed_batch(texts: list[str], provider: EmbeddingProvider) -> list[Vector]:
    if not texts:
        return []
    vectors = provider.embed(list(texts))
    if len(vectors) != len(texts):
        raise SacError(f"provider returned {len(vectors)} vectors for {len(texts)} texts")
    for text, vec in zip(texts, vectors):
        if vec.flagged and text.strip():
            logger.warning("zero embedding for non-empty text %r", text[:40])
    return vectors


__all__ = [
    "Vector", "normalize", "cosine", "hash_embed", "fnv1a_64", "EmbeddingProviderConfig",
    "HashEmbedder", "RemoteEmbedder", "CachedEmbedder", "make_provider", "embed_batch",
    "provider_manifest",
]
