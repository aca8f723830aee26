"""Per-document summaries ("document fingerprints") with a length contract and a disk cache."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Literal, Protocol

from .corpus import Corpus, Document
from .errors import BackendError, ConfigError, SacError, SummarizationError
from .prompts import TEMPLATES
from ._http import JsonPoster
from ._io import atomic_write_text

logger = logging.getLogger(__name__)

Strategy = Literal["generic", "expert"]
MIN_RETRY_LENGTH = 40


@dataclass(frozen=True)
class SummaryConfig:
    strategy: Strategy = "generic"
    char_length: int = 150
    tolerance: int = 20
    max_retries: int = 3
    seed: int | None = 0
    model_id: str = "gpt-4o-mini"

    def __post_init__(self):
        if self.strategy not in TEMPLATES:
            raise ConfigError(f"unknown summary strategy {self.strategy!r}")
        if self.char_length < 1 or self.tolerance < 0 or self.max_retries < 0:
            raise ConfigError("need char_length >= 1, tolerance >= 0, max_retries >= 0")

    @property
    def limit(self) -> int:
        return self.char_length + self.tolerance


@dataclass(frozen=True)
class Summary:
    doc_id: str
    text: str
    strategy: str
    requested_length: int
    attempts: int
    model_id: str
    seed: int | None = None
    truncated: bool = False

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "Summary":
        return cls(**{k: data[k] for k in cls.__dataclass_fields__ if k in data})


def render_prompt(strategy: str, char_length: int, document_text: str) -> tuple[str, str]:
    """Return (system, user) messages with both template slots filled."""
    if strategy not in TEMPLATES:
        raise ConfigError(f"unknown summary strategy {strategy!r}")
    if not document_text:
        raise ValueError("document_text must be non-empty")
    system, user = TEMPLATES[strategy]
    user = user.replace("{char_length}", str(char_length)).replace("{document_content}", document_text)
    return system, user


class ChatBackend(Protocol):
    model_id: str

    def complete(self, system: str, user: str, *, seed: int | None = None, doc_id: str | None = None) -> str: ...


class HttpChatBackend:
    """Chat-completions client (``POST /v1/chat/completions``)."""

    def __init__(self, base_url: str, model_id: str, api_key: str | None = None, **poster_kwargs):
        self.model_id = model_id
        if api_key is None:
            api_key = os.environ.get("SAC_LLM_API_KEY")
        self._poster = JsonPoster(base_url, api_key, **poster_kwargs)

    def complete(self, system, user, *, seed=None, doc_id=None):
        payload = {
            "model": self.model_id,
            "messages": [{"role": "system", "content": system}, {"role": "user", "content": user}],
        }
        if seed is not None:
            payload["seed"] = seed
        data = self._poster.post("/v1/chat/completions", payload)
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed chat response: {str(data)[:200]}") from exc
        return content or ""


_TARGET_RE = re.compile(r"(?:maximum|under) (\d+) characters")
_DOC_MARKERS = ("Here is the document you should summarize:\n", "\n\nDocument: ")


class StubChatBackend:
    """Offline backend: ``"<doc_id> | <leading document text>"`` cut to the requested length.

    The target length and the document are read back out of the rendered
    prompt, so this exercises the same prompt path as a real model.
    """

    model_id = "stub"

    def __init__(self):
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, system, user, *, seed=None, doc_id=None):
        with self._lock:
            self.calls += 1
        match = _TARGET_RE.search(user)
        target = int(match.group(1)) if match else 150
        document = user
        for marker in _DOC_MARKERS:
            pos = user.rfind(marker)
            if pos >= 0:
                document = user[pos + len(marker):]
                break
        lead = " ".join(document.split())
        text = f"{doc_id} | {lead}" if doc_id else lead
        return text[:target].rstrip()


def truncate_at_word(text: str, limit: int) -> str:
    if len(text) <= limit:
        return text
    head = text[:limit]
    if not text[limit].isspace():
        cut = max(head.rfind(" "), head.rfind("\n"), head.rfind("\t"))
        if cut > 0:
            head = head[:cut]
    return head.rstrip()


def summarize_document(document: Document, config: SummaryConfig, client: ChatBackend) -> Summary:
    """Ask `client` for a summary until it fits ``char_length + tolerance``.

    Each overlong answer lowers the requested length by the overflow (floor
    40); after ``max_retries`` retries the last answer is cut at a word
    boundary and flagged as truncated.
    """
    target = config.char_length
    last = ""
    attempts = 0
    for attempts in range(1, config.max_retries + 2):
        system, user = render_prompt(config.strategy, target, document.text)
        try:
            text = client.complete(system, user, seed=config.seed, doc_id=document.doc_id)
        except BackendError as exc:
            raise SummarizationError(document.doc_id, str(exc)) from exc
        text = (text or "").strip()
        if not text:
            logger.warning("%s: empty summary on attempt %d", document.doc_id, attempts)
            continue
        last = text
        if len(text) <= config.limit:
            return _summary(document, config, text, attempts, truncated=False)
        overflow = len(text) - config.limit
        target = max(MIN_RETRY_LENGTH, target - overflow)
        logger.info("%s: summary %d chars > %d, retrying with char_length=%d",
                    document.doc_id, len(text), config.limit, target)
    if not last:
        raise SummarizationError(document.doc_id, f"backend returned empty output {attempts} times")
    return _summary(document, config, truncate_at_word(last, config.limit), attempts, truncated=True)


def _summary(document, config, text, attempts, truncated) -> Summary:
    return Summary(document.doc_id, text, config.strategy, config.char_length, attempts,
                   config.model_id, config.seed, truncated)


class SummaryCache:
    """One JSON file per (doc_id, strategy, char_length, model_id, seed)."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def path(self, doc_id: str, config: SummaryConfig) -> Path:
        key = json.dumps([doc_id, config.strategy, config.char_length, config.model_id, config.seed])
        digest = hashlib.sha256(key.encode("utf-8")).hexdigest()
        return self.root / config.strategy / f"{digest}.json"

    def get(self, doc_id: str, config: SummaryConfig) -> Summary | None:
        path = self.path(doc_id, config)
        if not path.exists():
            return None
        return Summary.from_json(json.loads(path.read_text(encoding="utf-8")))

    def put(self, summary: Summary, config: SummaryConfig) -> None:
        path = self.path(summary.doc_id, config)
        atomic_write_text(path, json.dumps(summary.to_json(), ensure_ascii=False, indent=1, sort_keys=True))


class SummarizationFailures(SacError):
    def __init__(self, summaries: dict[str, Summary], failures: dict[str, str]):
        super().__init__(f"{len(failures)} document(s) without a summary: " + ", ".join(sorted(failures)))
        self.summaries = summaries
        self.failures = failures


def summarize_corpus(corpus: Corpus, config: SummaryConfig, client: ChatBackend,
                     cache: SummaryCache | None = None, concurrency: int = 4) -> dict[str, Summary]:
    """Summarize every document, cache first.

    Per-document failures do not stop the others; if any occurred,
    :class:`SummarizationFailures` is raised at the end carrying both the
    finished summaries and the errors.
    """
    summaries: dict[str, Summary] = {}
    todo: list[Document] = []
    for doc in corpus:
        hit = cache.get(doc.doc_id, config) if cache else None
        if hit is not None:
            summaries[doc.doc_id] = hit
        else:
            todo.append(doc)
    logger.info("summaries: %d cached, %d to generate", len(summaries), len(todo))

    failures: dict[str, str] = {}

    def work(doc: Document):
        try:
            summary = summarize_document(doc, config, client)
        except SacError as exc:
            return doc.doc_id, None, str(exc)
        if cache:
            cache.put(summary, config)
        return doc.doc_id, summary, None

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        for n, (doc_id, summary, err) in enumerate(pool.map(work, todo), 1):
            if err is not None:
                failures[doc_id] = err
                logger.error("summary failed for %s", err)
            else:
                summaries[doc_id] = summary
            if n % 50 == 0 or n == len(todo):
                logger.info("summarized %d/%d", n, len(todo))

    summaries = dict(sorted(summaries.items()))
    if failures:
        raise SummarizationFailures(summaries, failures)
    return summaries
