"""Run configuration (TOML) for the pipeline and the sweep runner."""
from __future__ import annotations

import codecs
import hashlib
import json
import os
import re
import sys
from dataclasses import dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Literal

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .chunking import DEFAULT_SEPARATORS, ChunkConfig
from .embedding import EmbeddingProviderConfig
from .errors import ConfigError
from .evaluation import DEFAULT_K_LIST
from .index import Bm25Params, HybridWeights
from .summarization import SummaryConfig

_ENV_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


@dataclass(frozen=True)
class SummarySettings:
    enabled: bool = True
    strategy: Literal["generic", "expert"] = "generic"
    char_length: int = 150
    tolerance: int = 20
    max_retries: int = 3
    backend: Literal["stub", "http"] = "stub"
    model_id: str = "gpt-4o-mini"
    base_url: str = ""
    concurrency: int = field(default=4, compare=False)
    api_key: str | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.backend not in ("stub", "http"):
            raise ConfigError(f"unknown summary backend {self.backend!r}")
        if self.backend == "http" and not self.base_url:
            raise ConfigError("summary backend 'http' needs base_url")
        self.for_seed(0)  # validates the nested config

    def for_seed(self, seed: int | None) -> SummaryConfig:
        model_id = "stub" if self.backend == "stub" else self.model_id
        return SummaryConfig(self.strategy, self.char_length, self.tolerance, self.max_retries, seed, model_id)


@dataclass(frozen=True)
class HybridSettings:
    enabled: bool = False
    w_semantic: float = 1.0
    pool: int = 128

    def __post_init__(self):
        HybridWeights(self.w_semantic)
        if self.pool < 1:
            raise ConfigError("hybrid pool must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    corpus_root: Path
    benchmark_file: Path
    workdir: Path = Path("work")
    span_unit: Literal["char", "byte"] = "char"
    chunk: ChunkConfig = field(default_factory=ChunkConfig)
    summary: SummarySettings = field(default_factory=SummarySettings)
    provider: EmbeddingProviderConfig = field(default_factory=EmbeddingProviderConfig)
    provider_api_key: str | None = field(default=None, repr=False, compare=False)
    bm25: Bm25Params = field(default_factory=Bm25Params)
    sparse_on_augmented: bool = True
    hybrid: HybridSettings = field(default_factory=HybridSettings)
    k_list: tuple[int, ...] = DEFAULT_K_LIST
    seeds: tuple[int, ...] = (0, 1, 2)
    strategy: str | None = None

    def __post_init__(self):
        ks = tuple(self.k_list)
        if not ks or list(ks) != sorted(set(ks)) or ks[0] < 1:
            raise ConfigError(f"k_list must be sorted, unique and positive, got {list(ks)}")
        if not self.seeds:
            raise ConfigError("seeds must not be empty")
        if self.span_unit not in ("char", "byte"):
            raise ConfigError("span_unit must be 'char' or 'byte'")
        if self.hybrid.enabled and self.hybrid.pool < ks[-1]:
            raise ConfigError(f"hybrid pool {self.hybrid.pool} is smaller than max k {ks[-1]}")
        object.__setattr__(self, "k_list", ks)
        object.__setattr__(self, "seeds", tuple(self.seeds))

    @property
    def label(self) -> str:
        if self.strategy:
            return self.strategy
        if self.hybrid.enabled:
            return f"hybrid-{self.hybrid.w_semantic:.2f}"
        if self.summary.enabled:
            return f"sac-{self.summary.strategy}"
        return "baseline"

    @property
    def summary_length(self) -> int:
        return self.summary.char_length if self.summary.enabled else 0

    def with_overrides(self, **changes) -> "RunConfig":
        return replace(self, **changes)


def _to_plain(obj):
    if is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in fields(obj)
                if f.compare and "api_key" not in f.name}
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, (list, tuple)):
        return [_to_plain(x) for x in obj]
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    return obj


def config_hash(*parts) -> str:
    """Stable digest over config values (secrets are never included)."""
    blob = json.dumps([_to_plain(p) for p in parts], sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _interpolate(value):
    if not isinstance(value, str):
        return value

    def sub(m):
        name = m.group(1)
        if name not in os.environ:
            raise ConfigError(f"environment variable {name} is not set")
        return os.environ[name]

    return _ENV_RE.sub(sub, value)


def _unescape(sep: str) -> str:
    return codecs.decode(sep, "unicode_escape") if "\\" in sep else sep


def _section(cls, data: dict, name: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"[{name}] unknown key(s): {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}] {exc}") from exc


def parse_config(data: dict, base_dir: Path = Path(".")) -> RunConfig:
    data = dict(data)
    try:
        corpus_root = data.pop("corpus_root")
        benchmark = data.pop("benchmark_file")
    except KeyError as exc:
        raise ConfigError(f"missing required key {exc.args[0]!r}") from None

    def path(p) -> Path:
        p = Path(p).expanduser()
        return p if p.is_absolute() else (base_dir / p).resolve()

    chunk = dict(data.pop("chunk", {}))
    if "separators" in chunk:
        chunk["separators"] = tuple(_unescape(s) for s in chunk["separators"])
    else:
        chunk["separators"] = DEFAULT_SEPARATORS

    summary = dict(data.pop("summary", {}))
    if "api_key" in summary:
        summary["api_key"] = _interpolate(summary["api_key"])
    provider = dict(data.pop("provider", {}))
    provider_key = _interpolate(provider.pop("api_key", None))
    bm25 = dict(data.pop("bm25", {}))
    sparse_on_augmented = bm25.pop("sparse_on_augmented", True)
    hybrid = dict(data.pop("hybrid", {}))

    kwargs = {}
    for key in ("span_unit", "strategy"):
        if key in data:
            kwargs[key] = data.pop(key)
    for key in ("k_list", "seeds"):
        if key in data:
            kwargs[key] = tuple(data.pop(key))
    workdir = path(data.pop("workdir", "work"))
    if data:
        raise ConfigError(f"unknown top-level key(s): {sorted(data)}")
    try:
        return RunConfig(
            corpus_root=path(corpus_root),
            benchmark_file=path(benchmark),
            workdir=workdir,
            chunk=_section(ChunkConfig, chunk, "chunk"),
            summary=_section(SummarySettings, summary, "summary"),
            provider=_section(EmbeddingProviderConfig, provider, "provider"),
            provider_api_key=provider_key,
            bm25=_section(Bm25Params, bm25, "bm25"),
            sparse_on_augmented=bool(sparse_on_augmented),
            hybrid=_section(HybridSettings, hybrid, "hybrid"),
            **kwargs,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data, base_dir=path.parent.resolve())


def dump_config(cfg: RunConfig) -> dict:
    """JSON-able view of a config (no secrets), for stage manifests."""
    return _to_plain(cfg)


__all__ = ["RunConfig", "SummarySettings", "HybridSettings", "load_config", "parse_config",
           "config_hash", "dump_config"]
