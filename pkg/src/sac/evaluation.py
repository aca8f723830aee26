"""Retrieval metrics: document-level retrieval mismatch (DRM) and character-level precision/recall."""
from __future__ import annotations

import csv
import json
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Callable

from .corpus import BenchmarkCase, Corpus
from .index import SearchResult
from ._io import atomic_write_text

logger = logging.getLogger(__name__)

DEFAULT_K_LIST = (1, 2, 4, 8, 15, 32, 64)
CSV_COLUMNS = ["dataset", "strategy", "chunk_size", "summary_length", "seed", "k",
               "drm", "precision", "recall", "cases"]
MEAN_K = "avg"  # k value of the rows averaged over the whole k list


def merge_intervals(spans) -> list[tuple[int, int]]:
    merged: list[list[int]] = []
    for start, end in sorted(spans):
        if merged and start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return [(s, e) for s, e in merged]


def _covered(intervals: list[tuple[int, int]]) -> int:
    return sum(e - s for s, e in intervals)


def _overlap(a: list[tuple[int, int]], b: list[tuple[int, int]]) -> int:
    """Total intersection length of two sorted, disjoint interval lists."""
    i = j = total = 0
    while i < len(a) and j < len(b):
        lo, hi = max(a[i][0], b[j][0]), min(a[i][1], b[j][1])
        if lo < hi:
            total += hi - lo
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return total


def drm(result: SearchResult, case: BenchmarkCase) -> float:
    """Share of returned chunks from documents outside the case's ground truth."""
    if not result.ranked:
        logger.debug("empty result for %r counted as full mismatch", case.query[:40])
        return 1.0
    gt_docs = case.gt_doc_ids
    wrong = sum(1 for c, _ in result.ranked if c.doc_id not in gt_docs)
    return wrong / len(result.ranked)


def char_precision_recall(result: SearchResult, case: BenchmarkCase) -> tuple[float, float]:
    retrieved: dict[str, list] = defaultdict(list)
    for c, _ in result.ranked:
        retrieved[c.doc_id].append((c.span.start, c.span.end))
    truth: dict[str, list] = defaultdict(list)
    for doc_id, span in case.ground_truth:
        truth[doc_id].append((span.start, span.end))

    r_total = g_total = hit = 0
    r_merged = {d: merge_intervals(s) for d, s in retrieved.items()}
    for doc_id, spans in truth.items():
        g = merge_intervals(spans)
        g_total += _covered(g)
        if doc_id in r_merged:
            hit += _overlap(r_merged[doc_id], g)
    r_total = sum(_covered(v) for v in r_merged.values())
    precision = hit / r_total if r_total else 0.0
    recall = hit / g_total if g_total else 0.0
    return precision, recall


@dataclass(frozen=True)
class QueryMetrics:
    case_id: str
    k: int
    drm: float
    precision: float
    recall: float


@dataclass(frozen=True)
class MetricsRow:
    dataset: str
    strategy: str
    chunk_size: int
    summary_length: int
    seed: int | None
    k: int | str
    drm: float
    precision: float
    recall: float
    cases: int

    def to_csv(self) -> dict:
        return asdict(self)


@dataclass
class RunEvaluation:
    rows: list[MetricsRow]
    per_query: list[QueryMetrics] = field(default_factory=list)
    failures: dict[str, str] = field(default_factory=dict)

    @property
    def flagged(self) -> bool:
        return bool(self.failures)


def query_metrics(result: SearchResult, case: BenchmarkCase, k: int) -> QueryMetrics:
    prefix = result.prefix(k)
    precision, recall = char_precision_recall(prefix, case)
    return QueryMetrics(case.case_id, k, drm(prefix, case), precision, recall)


def _check_spans(result: SearchResult, corpus: Corpus | None):
    if corpus is None:
        return
    for c, _ in result.ranked:
        doc = corpus[c.doc_id]
        assert c.span.end <= doc.length and doc.text[c.span.start:c.span.end] == c.chunk.text, \
            f"chunk span {c.span.as_list()} does not match {c.doc_id}"


def evaluate_run(cases: list[BenchmarkCase], search: Callable[[str, int], SearchResult],
                 k_list=DEFAULT_K_LIST, *, corpus: Corpus | None = None, strategy: str = "baseline",
                 chunk_size: int = 0, summary_length: int = 0, seed: int | None = None) -> RunEvaluation:
    """Run every case once at ``max(k_list)`` and score each k on the ranking prefix.

    Rows come out per (dataset, k), plus one row per dataset with
    ``k == "avg"`` holding the plain mean over the k list.
    """
    k_list = sorted(set(k_list))
    if not cases:
        return RunEvaluation([])
    k_max = k_list[-1]
    per_query: list[QueryMetrics] = []
    by_dataset: dict[str, list[str]] = defaultdict(list)
    failures: dict[str, str] = {}
    for n, case in enumerate(cases):
        cid = case.case_id or str(n)
        try:
            result = search(case.query, k_max)
        except Exception as exc:  # a failing case must not sink the run
            failures[cid] = f"{type(exc).__name__}: {exc}"
            logger.error("search failed for case %s: %s", cid, exc)
            continue
        _check_spans(result, corpus)
        by_dataset[case.dataset_tag].append(cid)
        for k in k_list:
            m = query_metrics(result, case, k)
            per_query.append(QueryMetrics(cid, k, m.drm, m.precision, m.recall))

    index = {(q.case_id, q.k): q for q in per_query}
    rows: list[MetricsRow] = []
    meta = dict(strategy=strategy, chunk_size=chunk_size, summary_length=summary_length, seed=seed)
    for dataset in sorted(by_dataset):
        ids = by_dataset[dataset]
        per_k = []
        for k in k_list:
            ms = [index[(cid, k)] for cid in ids]
            row = MetricsRow(dataset=dataset, k=k, drm=fmean(m.drm for m in ms),
                             precision=fmean(m.precision for m in ms), recall=fmean(m.recall for m in ms),
                             cases=len(ms), **meta)
            rows.append(row)
            per_k.append(row)
        rows.append(MetricsRow(dataset=dataset, k=MEAN_K, drm=fmean(r.drm for r in per_k),
                               precision=fmean(r.precision for r in per_k),
                               recall=fmean(r.recall for r in per_k), cases=len(ids), **meta))
    return RunEvaluation(rows, per_query, failures)


def mean_over_k(rows: list[MetricsRow]) -> dict[str, float]:
    """Grand mean of the ``k == "avg"`` rows (datasets and seeds weighted equally)."""
    avg = [r for r in rows if r.k == MEAN_K]
    if not avg:
        return {"drm": float("nan"), "precision": float("nan"), "recall": float("nan")}
    return {m: fmean(getattr(r, m) for r in avg) for m in ("drm", "precision", "recall")}


# reports ---------------------------------------------------------------------

def write_metrics_csv(rows: list[MetricsRow], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for r in rows:
            rec = r.to_csv()
            rec["seed"] = "" if r.seed is None else r.seed
            writer.writerow(rec)


def read_metrics_csv(path: str | Path) -> list[MetricsRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append(MetricsRow(
                dataset=rec["dataset"], strategy=rec["strategy"], chunk_size=int(rec["chunk_size"]),
                summary_length=int(rec["summary_length"]),
                seed=int(rec["seed"]) if rec["seed"] != "" else None,
                k=rec["k"] if rec["k"] == MEAN_K else int(rec["k"]),
                drm=float(rec["drm"]), precision=float(rec["precision"]), recall=float(rec["recall"]),
                cases=int(rec["cases"])))
    return rows


def summary_tree(rows: list[MetricsRow]) -> dict:
    """strategy -> dataset -> k -> mean metrics over the remaining axes."""
    groups: dict[tuple, list[MetricsRow]] = defaultdict(list)
    for r in rows:
        groups[(r.strategy, r.dataset, str(r.k))].append(r)
    tree: dict = {}
    for (strategy, dataset, k), rs in sorted(groups.items()):
        tree.setdefault(strategy, {}).setdefault(dataset, {})[k] = {
            "drm": fmean(r.drm for r in rs),
            "precision": fmean(r.precision for r in rs),
            "recall": fmean(r.recall for r in rs),
            "cases": sum(r.cases for r in rs),
            "runs": len(rs),
        }
    return tree


def hybrid_weight(strategy: str) -> float | None:
    if strategy.startswith("hybrid-"):
        try:
            return float(strategy.split("-", 1)[1])
        except ValueError:
            return None
    return None


def _pct(x: float) -> str:
    return f"{100 * x:.2f}"


def _metric_lines(cells: list[dict[str, float]]) -> list[str]:
    return [
        "| Prec.(%) | " + " | ".join(_pct(c["precision"]) for c in cells) + " |",
        "| Rec.(%) | " + " | ".join(_pct(c["recall"]) for c in cells) + " |",
        "| DRM(%) | " + " | ".join(_pct(c["drm"]) for c in cells) + " |",
    ]


def render_table1(rows: list[MetricsRow]) -> str:
    """Chunk size x summary length grid, one block per non-hybrid strategy."""
    by_strategy: dict[str, dict[tuple[int, int], list[MetricsRow]]] = defaultdict(lambda: defaultdict(list))
    for r in rows:
        if hybrid_weight(r.strategy) is None:
            by_strategy[r.strategy][(r.chunk_size, r.summary_length)].append(r)
    out = ["# Chunk size / summary length ablation", "",
           "Averaged over the evaluated top-k settings, datasets and seeds.", ""]
    for strategy in sorted(by_strategy):
        grid = by_strategy[strategy]
        cols = sorted(grid)
        out += [f"## {strategy}", "",
                "| Chunk | " + " | ".join(str(c) for c, _ in cols) + " |",
                "|---|" + "---|" * len(cols),
                "| Sum. | " + " | ".join(str(s) if s else "none" for _, s in cols) + " |"]
        out += _metric_lines([mean_over_k(grid[c]) for c in cols])
        out.append("")
    return "\n".join(out)


def render_table2(rows: list[MetricsRow]) -> str:
    """Dense/sparse weighting grid over the hybrid strategies."""
    grid: dict[float, list[MetricsRow]] = defaultdict(list)
    for r in rows:
        w = hybrid_weight(r.strategy)
        if w is not None:
            grid[w].append(r)
    ws = sorted(grid, reverse=True)
    out = ["# Dense / sparse weighting", "",
           "Averaged over the evaluated top-k settings, datasets and seeds.", "",
           "| w_semantic | " + " | ".join(f"{100 * w:.0f}%" for w in ws) + " |",
           "|---|" + "---|" * len(ws),
           "| w_keyword | " + " | ".join(f"{100 * (1 - w):.0f}%" for w in ws) + " |"]
    out += _metric_lines([mean_over_k(grid[w]) for w in ws])
    out.append("")
    return "\n".join(out)


def emit_report(rows: list[MetricsRow], directory: str | Path) -> dict[str, Path]:
    if not rows:
        raise ValueError("no metric rows to report")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {
        "metrics.csv": directory / "metrics.csv",
        "summary.json": directory / "summary.json",
        "table1.md": directory / "table1.md",
    }
    write_metrics_csv(rows, files["metrics.csv"])
    atomic_write_text(files["summary.json"], json.dumps(summary_tree(rows), indent=2, sort_keys=True))
    atomic_write_text(files["table1.md"], render_table1(rows))
    if any(hybrid_weight(r.strategy) is not None for r in rows):
        files["table2.md"] = directory / "table2.md"
        atomic_write_text(files["table2.md"], render_table2(rows))
    return files
