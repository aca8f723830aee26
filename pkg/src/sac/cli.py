"""``sac`` command line: staged pipeline, sweeps, synthetic corpora, reports.

Exit status is 0 on success, 1 for configuration or validation problems
and 2 for runtime failures.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import RunConfig, load_config
from .errors import ConfigError, SacError
from .evaluation import emit_report, mean_over_k, read_metrics_csv
from .pipeline import Pipeline, parse_grid, run_sweep
from .synthetic import SyntheticSpec, write_synthetic

logger = logging.getLogger("sac")

SYNTH_CONFIG = """\
# Offline run over a synthetic corpus: hash embeddings, stub summarizer.
corpus_root = "corpus"
benchmark_file = "benchmark.json"
workdir = "work"

[chunk]
chunk_size = 500
overlap = 0

[summary]
enabled = true
strategy = "generic"
char_length = 150
backend = "stub"

[provider]
kind = "hash"
dim = 256
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=Path("run.toml"), help="run config (TOML); default run.toml")
    common.add_argument("--workdir", type=Path, help="override the config's workdir")
    common.add_argument("--force", action="store_true", help="rebuild stages produced by a different config")
    common.add_argument("--jobs", type=int, default=None,
                        help="parallel sweep cells; for other commands, summarization concurrency")
    common.add_argument("--span-unit", choices=("char", "byte"),
                        help="unit of benchmark span offsets (overrides the config)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="sac", description="Summary-augmented chunking retrieval and evaluation")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("ingest", parents=[common], help="load and validate corpus and benchmark")
    sub.add_parser("summarize", parents=[common], help="generate (or reuse cached) document summaries")
    sub.add_parser("index", parents=[common], help="chunk, embed and persist an index per seed")

    q = sub.add_parser("query", parents=[common], help="search the index of the first seed")
    q.add_argument("--q", required=True, help="query text")
    q.add_argument("--k", type=int, default=4)
    q.add_argument("--seed", type=int, help="which seed's index to use")
    q.add_argument("--json", action="store_true", help="print results as JSON lines")

    sub.add_parser("evaluate", parents=[common], help="run the benchmark and write metrics.csv and tables")

    s = sub.add_parser("sweep", parents=[common], help="evaluate a grid of configurations")
    s.add_argument("--grid", nargs="+", default=[], metavar="NAME=V1,V2",
                   help="dimensions: chunk, summary, w, strategy, seed")
    s.add_argument("--out", type=Path, help="report directory (default <workdir>/sweep/report)")

    y = sub.add_parser("synth", parents=[common], help="write a synthetic boilerplate corpus")
    y.add_argument("--spec", type=Path, help="JSON file with SyntheticSpec fields")
    y.add_argument("--out", type=Path, required=True)

    r = sub.add_parser("report", parents=[common], help="re-render tables from metrics CSV files")
    r.add_argument("--metrics", type=Path, nargs="*", help="CSV files (default <workdir>/eval/metrics.csv)")
    r.add_argument("--out", type=Path, help="output directory (default next to the first CSV)")
    return parser


def _config(args) -> RunConfig:
    if not args.config.exists():
        raise ConfigError(f"config file {args.config} not found (use --config)")
    cfg = load_config(args.config)
    if args.workdir is not None:
        cfg = replace(cfg, workdir=args.workdir.resolve())
    if args.span_unit is not None:
        cfg = replace(cfg, span_unit=args.span_unit)
    if args.jobs is not None and args.command != "sweep":
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg = replace(cfg, summary=replace(cfg.summary, concurrency=args.jobs))
    return cfg


def _snippet(text: str, width: int = 100) -> str:
    flat = " ".join(text.split())
    return flat if len(flat) <= width else flat[:width - 3] + "..."


def cmd_ingest(args) -> int:
    corpus, cases = Pipeline(_config(args), force=args.force).ingest()
    print(f"{len(corpus)} documents, {len(cases)} cases")
    return 0


def cmd_summarize(args) -> int:
    cfg = _config(args)
    if not cfg.summary.enabled:
        print("summaries disabled in config; nothing to do")
        return 0
    pipe = Pipeline(cfg, force=args.force)
    for seed in cfg.seeds:
        summaries = pipe.summarize(seed)
        truncated = sum(s.truncated for s in summaries.values())
        print(f"seed {seed}: {len(summaries)} summaries ({truncated} truncated)")
    return 0


def cmd_index(args) -> int:
    cfg = _config(args)
    pipe = Pipeline(cfg, force=args.force)
    for seed in cfg.seeds:
        idx = pipe.index(seed)
        print(f"seed {seed}: {len(idx)} chunks -> {pipe.index_dir(seed)}")
    return 0


def cmd_query(args) -> int:
    if args.k < 1:
        raise ConfigError("--k must be >= 1")
    result = Pipeline(_config(args), force=args.force).query(args.q, args.k, seed=args.seed)
    for rank, (c, score) in enumerate(result.ranked, 1):
        if args.json:
            print(json.dumps({"rank": rank, "doc_id": c.doc_id, "span": c.span.as_list(),
                              "score": score, "text": c.chunk.text}, ensure_ascii=False))
        else:
            print(f"{rank:>3}  {c.doc_id}  [{c.span.start}, {c.span.end})  {score:.4f}  {_snippet(c.chunk.text)}")
    return 0


def _print_means(label: str, rows) -> None:
    m = mean_over_k(rows)
    print(f"{label}: DRM {100 * m['drm']:.2f}%  precision {100 * m['precision']:.2f}%  "
          f"recall {100 * m['recall']:.2f}%")


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    pipe = Pipeline(cfg, force=args.force)
    rows, failures = pipe.evaluate()
    _print_means(cfg.label, rows)
    print(f"report: {pipe.eval_dir()}")
    for cid, err in failures.items():
        print(f"failed case {cid}: {err}", file=sys.stderr)
    return 2 if failures else 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    jobs = 1 if args.jobs is None else args.jobs
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    result = run_sweep(cfg, parse_grid(args.grid), jobs=jobs, force=args.force, out=args.out)
    for name, path in result.report.items():
        print(f"{name}: {path}")
    for cell, err in result.failures.items():
        print(f"failed {cell}: {err}", file=sys.stderr)
    return 2 if result.failures or not result.rows else 0


def cmd_synth(args) -> int:
    data = {}
    if args.spec is not None:
        try:
            data = json.loads(args.spec.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read synthetic spec {args.spec}: {exc}") from exc
    spec = SyntheticSpec.from_json(data)
    corpus_dir, bench = write_synthetic(spec, args.out)
    run_toml = args.out / "run.toml"
    if not run_toml.exists():
        run_toml.write_text(SYNTH_CONFIG, encoding="utf-8")
    print(f"{spec.n_docs} documents in {corpus_dir}; benchmark {bench}; config {run_toml}")
    return 0


def cmd_report(args) -> int:
    paths = args.metrics
    if not paths:
        paths = [Pipeline(_config(args)).eval_dir() / "metrics.csv"]
    rows = []
    for p in paths:
        if not p.exists():
            raise ConfigError(f"metrics file {p} not found (run `sac evaluate` first)")
        rows.extend(read_metrics_csv(p))
    out = args.out or paths[0].parent
    for name, path in emit_report(rows, out).items():
        print(f"{name}: {path}")
    return 0


COMMANDS = {
    "ingest": cmd_ingest, "summarize": cmd_summarize, "index": cmd_index, "query": cmd_query,
    "evaluate": cmd_evaluate, "sweep": cmd_sweep, "synth": cmd_synth, "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except SacError as exc:
        print(f"sac {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"sac {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
