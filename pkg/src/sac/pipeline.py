"""Resumable pipeline stages behind the CLI.

Every stage writes a manifest ``<workdir>/stages/<name>.json`` holding the
hash of the configuration that produced its artifact. A stage whose
recorded hash matches is skipped; one whose hash differs is refused unless
``force`` is set, so artifacts from another configuration are never
silently mixed or overwritten.

Layout::

    <cache_root>/summaries/<strategy>/<key>.json   shared summary cache
    <cache_root>/embeddings/<provider>/...          shared embedding cache
    <workdir>/stages/*.json                         stage manifests
    <workdir>/ingest/cases.json                     validated benchmark
    <workdir>/runs/seed-<s>/index/                  persisted index per seed
    <workdir>/eval/                                 metrics.csv, summary.json, tables
"""
from __future__ import annotations

import hashlib
import itertools
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from .chunking import split_corpus
from .config import RunConfig, config_hash, dump_config
from .corpus import BenchmarkCase, Corpus, benchmark_to_json, load_benchmark, load_corpus
from .embedding import CachedEmbedder, make_provider
from .errors import ConfigError, SacError, StaleArtifactError
from .evaluation import MetricsRow, emit_report, evaluate_run, read_metrics_csv
from .index import HybridWeights, Index, SearchResult, build_index, load_index, save_index
from .summarization import HttpChatBackend, StubChatBackend, Summary, SummaryCache, summarize_corpus
from ._io import atomic_write_text

logger = logging.getLogger(__name__)


class Pipeline:
    def __init__(self, cfg: RunConfig, *, force: bool = False, cache_root: Path | None = None,
                 chat_backend=None, embedder=None):
        self.cfg = cfg
        self.force = force
        self.workdir = Path(cfg.workdir)
        self.cache_root = Path(cache_root) if cache_root else self.workdir
        self._chat = chat_backend
        self._embedder = embedder
        self._corpus: Corpus | None = None
        self._cases: list[BenchmarkCase] | None = None
        self._ingest_hash: str | None = None
        self.ran: list[str] = []  # stages that did work (not skipped) in this process

    # stage bookkeeping ------------------------------------------------------

    def _manifest_path(self, stage: str) -> Path:
        return self.workdir / "stages" / f"{stage}.json"

    def _status(self, stage: str, digest: str) -> bool:
        """True when the stage is up to date; False when it must run."""
        path = self._manifest_path(stage)
        if not path.exists():
            return False
        recorded = json.loads(path.read_text(encoding="utf-8")).get("hash")
        if recorded == digest:
            return True
        if self.force:
            logger.warning("stage %s: overwriting artifact from config %s (--force)", stage, recorded)
            return False
        raise StaleArtifactError(
            f"stage '{stage}' in {self.workdir} was produced by a different configuration "
            f"(recorded {recorded}, current {digest}); use --force to rebuild or choose another --workdir")

    def _record(self, stage: str, digest: str, **extra):
        payload = {"stage": stage, "hash": digest,
                   "created": datetime.now(timezone.utc).isoformat(timespec="seconds"), **extra}
        atomic_write_text(self._manifest_path(stage), json.dumps(payload, indent=2, sort_keys=True))
        self.ran.append(stage)

    # backends ---------------------------------------------------------------

    @property
    def chat(self):
        if self._chat is None:
            s = self.cfg.summary
            self._chat = StubChatBackend() if s.backend == "stub" else \
                HttpChatBackend(s.base_url, s.model_id, s.api_key)
        return self._chat

    @property
    def embedder(self):
        if self._embedder is None:
            provider = make_provider(self.cfg.provider, self.cfg.provider_api_key)
            self._embedder = CachedEmbedder(provider, self.cache_root / "embeddings")
        return self._embedder

    # stages -----------------------------------------------------------------

    def ingest(self) -> tuple[Corpus, list[BenchmarkCase]]:
        if self._corpus is not None:
            return self._corpus, self._cases
        cfg = self.cfg
        corpus = load_corpus(cfg.corpus_root)
        cases = load_benchmark(cfg.benchmark_file, corpus, span_unit=cfg.span_unit)
        content = hashlib.sha256()
        for doc in corpus:
            content.update(doc.doc_id.encode() + b"\0" + doc.text.encode() + b"\0")
        content.update(json.dumps(benchmark_to_json(cases), sort_keys=True).encode())
        digest = config_hash(str(cfg.corpus_root), str(cfg.benchmark_file), cfg.span_unit, content.hexdigest())
        if not self._status("ingest", digest):
            atomic_write_text(self.workdir / "ingest" / "cases.json",
                              json.dumps(benchmark_to_json(cases), indent=1, ensure_ascii=False))
            self._record("ingest", digest, documents=len(corpus), cases=len(cases))
        self._corpus, self._cases, self._ingest_hash = corpus, cases, digest
        logger.info("ingest: %d documents, %d cases", len(corpus), len(cases))
        return corpus, cases

    def _summarize_hash(self, seed: int) -> str:
        return config_hash(self._ingest_hash, self.cfg.summary, seed)

    def summarize(self, seed: int) -> dict[str, Summary] | None:
        if not self.cfg.summary.enabled:
            return None
        corpus, _ = self.ingest()
        digest = self._summarize_hash(seed)
        up_to_date = self._status(f"summarize-seed{seed}", digest)
        summaries = summarize_corpus(corpus, self.cfg.summary.for_seed(seed), self.chat,
                                     SummaryCache(self.cache_root / "summaries"),
                                     concurrency=self.cfg.summary.concurrency)
        if not up_to_date:
            truncated = sorted(d for d, s in summaries.items() if s.truncated)
            self._record(f"summarize-seed{seed}", digest, documents=len(summaries), truncated=truncated)
        return summaries

    def _index_hash(self, seed: int) -> str:
        cfg = self.cfg
        upstream = self._summarize_hash(seed) if cfg.summary.enabled else None
        return config_hash(self._ingest_hash, upstream, cfg.chunk, cfg.provider, cfg.bm25, cfg.sparse_on_augmented)

    def index_dir(self, seed: int) -> Path:
        return self.workdir / "runs" / f"seed-{seed}" / "index"

    def index(self, seed: int) -> Index:
        corpus, _ = self.ingest()
        digest = self._index_hash(seed)
        stage = f"index-seed{seed}"
        if self._status(stage, digest):
            return load_index(self.index_dir(seed), self.embedder)
        summaries = self.summarize(seed)
        chunks = split_corpus(corpus, self.cfg.chunk)
        idx = build_index(chunks, summaries, self.embedder, self.cfg.bm25,
                          sparse_on_augmented=self.cfg.sparse_on_augmented, provider_config=self.cfg.provider)
        save_index(idx, self.index_dir(seed))
        self._record(stage, digest, chunks=len(chunks))
        return idx

    def searcher(self, idx: Index):
        h = self.cfg.hybrid
        if not h.enabled:
            return idx.dense_search
        weights = HybridWeights(h.w_semantic)
        return lambda q, k: idx.hybrid_search(q, k, weights, pool=h.pool)

    def query(self, text: str, k: int, seed: int | None = None) -> SearchResult:
        seed = self.cfg.seeds[0] if seed is None else seed
        return self.searcher(self.index(seed))(text, k)

    def eval_dir(self) -> Path:
        return self.workdir / "eval"

    def evaluate(self) -> tuple[list[MetricsRow], dict[str, str]]:
        cfg = self.cfg
        corpus, cases = self.ingest()
        digest = config_hash([self._index_hash(s) for s in cfg.seeds], cfg.k_list, cfg.hybrid, cfg.label)
        csv_path = self.eval_dir() / "metrics.csv"
        if self._status("evaluate", digest) and csv_path.exists():
            return read_metrics_csv(csv_path), {}
        rows: list[MetricsRow] = []
        failures: dict[str, str] = {}
        for seed in cfg.seeds:
            idx = self.index(seed)
            run = evaluate_run(cases, self.searcher(idx), cfg.k_list, corpus=corpus, strategy=cfg.label,
                               chunk_size=cfg.chunk.chunk_size, summary_length=cfg.summary_length, seed=seed)
            rows.extend(run.rows)
            failures.update({f"seed{seed}/{cid}": err for cid, err in run.failures.items()})
        if not rows:
            raise SacError("evaluation produced no rows (no benchmark cases?)")
        emit_report(rows, self.eval_dir())
        self._record("evaluate", digest, rows=len(rows), failures=failures, config=dump_config(cfg))
        return rows, failures


# sweeps -----------------------------------------------------------------------

GRID_ALIASES = {
    "chunk": "chunk_size", "chunk_size": "chunk_size",
    "summary": "summary_length", "summary_length": "summary_length",
    "w": "w_semantic", "w_semantic": "w_semantic",
    "strategy": "strategy",
    "seed": "seed", "seeds": "seed",
}


def parse_grid(tokens: list[str]) -> dict[str, list]:
    """``["chunk=200,500", "summary=150,300"]`` -> ``{"chunk_size": [200, 500], ...}``."""
    grid: dict[str, list] = {}
    for token in tokens:
        if "=" not in token:
            raise ConfigError(f"grid entry {token!r} is not NAME=V1,V2,...")
        name, _, values = token.partition("=")
        key = GRID_ALIASES.get(name.strip())
        if key is None:
            raise ConfigError(f"unknown grid dimension {name!r}; use one of "
                              "chunk_size, summary_length, w_semantic, strategy, seed")
        raw = [v.strip() for v in values.split(",") if v.strip()]
        if not raw:
            raise ConfigError(f"grid dimension {name!r} has no values")
        try:
            if key in ("chunk_size", "summary_length", "seed"):
                parsed = [int(v) for v in raw]
            elif key == "w_semantic":
                parsed = [float(v) for v in raw]
            else:
                parsed = raw
        except ValueError as exc:
            raise ConfigError(f"grid dimension {name!r}: {exc}") from exc
        grid[key] = parsed
    return grid


def cell_config(base: RunConfig, cell: dict, workdir: Path) -> RunConfig:
    cfg = base
    if "chunk_size" in cell:
        cfg = replace(cfg, chunk=replace(cfg.chunk, chunk_size=cell["chunk_size"]))
    if "summary_length" in cell:
        cfg = replace(cfg, summary=replace(cfg.summary, char_length=cell["summary_length"]))
    if "strategy" in cell:
        s = cell["strategy"].removeprefix("sac-")
        if s in ("baseline", "none"):
            cfg = replace(cfg, summary=replace(cfg.summary, enabled=False))
        elif s in ("generic", "expert"):
            cfg = replace(cfg, summary=replace(cfg.summary, enabled=True, strategy=s))
        else:
            raise ConfigError(f"unknown strategy {cell['strategy']!r} (baseline, generic, expert)")
    if "w_semantic" in cell:
        cfg = replace(cfg, hybrid=replace(cfg.hybrid, enabled=True, w_semantic=cell["w_semantic"]))
    if "seed" in cell:
        cfg = replace(cfg, seeds=(cell["seed"],))
    return replace(cfg, workdir=workdir)


def cell_name(cell: dict) -> str:
    return "_".join(f"{k}-{v}" for k, v in cell.items()) or "default"


@dataclass
class SweepResult:
    rows: list[MetricsRow]
    failures: dict[str, str] = field(default_factory=dict)
    report: dict[str, Path] = field(default_factory=dict)


def run_sweep(base: RunConfig, grid: dict[str, list], *, jobs: int = 1, force: bool = False,
              out: Path | None = None) -> SweepResult:
    """Evaluate the cartesian product of `grid`; caches are shared across cells."""
    keys = list(grid)
    cells = [dict(zip(keys, values)) for values in itertools.product(*(grid[k] for k in keys))]
    root = Path(base.workdir)
    logger.info("sweep: %d cell(s) over %s", len(cells), keys or "nothing")

    def run(cell):
        name = cell_name(cell)
        try:
            cfg = cell_config(base, cell, root / "sweep" / name)
            rows, failures = Pipeline(cfg, force=force, cache_root=root).evaluate()
        except SacError as exc:
            logger.error("sweep cell %s failed: %s", name, exc)
            return name, [], {name: str(exc)}
        return name, rows, {f"{name}/{k}": v for k, v in failures.items()}

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(run, cells))
    rows = [r for _, cell_rows, _ in results for r in cell_rows]
    failures = {k: v for _, _, f in results for k, v in f.items()}
    report = emit_report(rows, out or root / "sweep" / "report") if rows else {}
    return SweepResult(rows, failures, report)
