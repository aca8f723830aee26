"""Document corpora, benchmark cases and character-offset addressing.

All offsets count Unicode code points of the decoded text (what ``str``
indexing gives in Python), never bytes.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Literal

from .errors import CorpusError, ValidationError

logger = logging.getLogger(__name__)

SpanUnit = Literal["char", "byte"]


@dataclass(frozen=True)
class Span:
    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid span [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start

    def as_list(self) -> list[int]:
        return [self.start, self.end]


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str

    @property
    def length(self) -> int:
        return len(self.text)

    def slice(self, span: Span) -> str:
        if span.end > self.length:
            raise ValueError(f"span {span.as_list()} exceeds {self.doc_id} (length {self.length})")
        return self.text[span.start:span.end]


@dataclass(frozen=True)
class BenchmarkCase:
    query: str
    ground_truth: tuple[tuple[str, Span], ...]
    dataset_tag: str
    case_id: str = ""

    @property
    def gt_doc_ids(self) -> frozenset[str]:
        return frozenset(doc_id for doc_id, _ in self.ground_truth)


@dataclass
class Corpus:
    root: Path | None
    documents: dict[str, Document] = field(default_factory=dict)

    def __post_init__(self):
        # iteration order is part of the contract
        self.documents = dict(sorted(self.documents.items()))

    @classmethod
    def from_documents(cls, docs, root: Path | None = None) -> "Corpus":
        documents: dict[str, Document] = {}
        for doc in docs:
            if not doc.doc_id:
                raise CorpusError("empty doc_id")
            if doc.doc_id in documents:
                raise CorpusError(f"duplicate doc_id {doc.doc_id!r}")
            documents[doc.doc_id] = doc
        return cls(root=root, documents=documents)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents.values())

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.documents

    def __getitem__(self, doc_id: str) -> Document:
        return self.documents[doc_id]


def load_corpus(root: str | Path) -> Corpus:
    """Load every ``*.txt`` file below `root` as a Document.

    The doc_id is the path relative to `root` with forward slashes.
    """
    root = Path(root)
    if not root.is_dir():
        raise CorpusError(f"corpus root {root} is not a directory")
    docs = []
    for path in sorted(root.rglob("*.txt")):
        if not path.is_file() or any(p.startswith(".") for p in path.relative_to(root).parts):
            continue
        doc_id = path.relative_to(root).as_posix()
        try:
            raw = path.read_bytes()
        except OSError as exc:
            raise CorpusError(f"cannot read {path}: {exc}") from exc
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorpusError(f"{path}: invalid UTF-8 at byte offset {exc.start}") from exc
        docs.append(Document(doc_id, text))
    logger.info("loaded %d documents from %s", len(docs), root)
    return Corpus.from_documents(docs, root=root)


# field-name variants seen in published span benchmarks
_CASES_KEYS = ("tests", "cases")
_QUERY_KEYS = ("query", "question")
_SNIPPETS_KEYS = ("snippets", "ground_truth")
_PATH_KEYS = ("file_path", "doc_id", "file")
_DATASET_KEYS = ("dataset", "dataset_tag")


def _first(d: dict, keys, default=None):
    for key in keys:
        if key in d:
            return d[key]
    return default


def _byte_to_char(text: str, offset: int) -> int:
    encoded = text.encode("utf-8")
    if offset > len(encoded):
        return len(text) + (offset - len(encoded))  # out of bounds, caught by validation
    prefix = encoded[:offset]
    try:
        return len(prefix.decode("utf-8"))
    except UnicodeDecodeError:
        raise ValueError(f"byte offset {offset} splits a multi-byte character") from None


def parse_benchmark(data: dict, corpus: Corpus, *, default_dataset: str = "default",
                    span_unit: SpanUnit = "char") -> list[BenchmarkCase]:
    """Normalize and validate a decoded benchmark document against `corpus`."""
    if not isinstance(data, dict):
        raise ValidationError("benchmark root must be a JSON object")
    raw_cases = _first(data, _CASES_KEYS, [])
    if not isinstance(raw_cases, list):
        raise ValidationError("benchmark 'tests' must be a list")

    cases: list[BenchmarkCase] = []
    problems: list[str] = []
    for i, raw in enumerate(raw_cases):
        query = _first(raw, _QUERY_KEYS)
        if not isinstance(query, str):
            problems.append(f"case {i}: missing query")
            continue
        snippets = _first(raw, _SNIPPETS_KEYS, [])
        if not snippets:
            problems.append(f"case {i}: no ground-truth snippets")
            continue
        gt = []
        for snip in snippets:
            doc_id = _first(snip, _PATH_KEYS)
            if "span" in snip:
                start, end = snip["span"]
            else:
                start, end = snip.get("start"), snip.get("end")
            if doc_id not in corpus:
                problems.append(f"case {i}: document {doc_id!r} not in corpus (span {[start, end]})")
                continue
            doc = corpus[doc_id]
            try:
                if span_unit == "byte":
                    start, end = _byte_to_char(doc.text, start), _byte_to_char(doc.text, end)
                if not (isinstance(start, int) and isinstance(end, int)) or end > doc.length:
                    raise ValueError("out of bounds")
                span = Span(start, end)
            except (TypeError, ValueError) as exc:
                problems.append(f"case {i}: {doc_id} span {[start, end]} invalid for length {doc.length} ({exc})")
                continue
            gt.append((doc_id, span))
        if len(gt) == len(snippets):
            dataset = _first(raw, _DATASET_KEYS, default_dataset)
            cases.append(BenchmarkCase(query, tuple(gt), str(dataset), case_id=str(raw.get("id", i))))
    if problems:
        raise ValidationError("benchmark validation failed:\n  " + "\n  ".join(problems))
    return cases


def load_benchmark(path: str | Path, corpus: Corpus, span_unit: SpanUnit = "char") -> list[BenchmarkCase]:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}: malformed JSON ({exc})") from exc
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc
    return parse_benchmark(data, corpus, default_dataset=path.stem, span_unit=span_unit)


def benchmark_to_json(cases: list[BenchmarkCase]) -> dict:
    """Canonical JSON shape accepted by :func:`load_benchmark`."""
    return {
        "tests": [
            {
                **({"id": c.case_id} if c.case_id else {}),
                "query": c.query,
                "dataset": c.dataset_tag,
                "snippets": [{"file_path": d, "span": s.as_list()} for d, s in c.ground_truth],
            }
            for c in cases
        ]
    }
