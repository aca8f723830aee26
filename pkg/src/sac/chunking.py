"""Recursive character splitting with exact source spans.

Separators stay attached to the end of the piece they terminate and no
whitespace is stripped, so every chunk is a verbatim substring of its
document and ``document.text[span.start:span.end] == chunk.text``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import Document, Span

DEFAULT_SEPARATORS = ("\n\n", "\n", " ", "")


@dataclass(frozen=True)
class ChunkConfig:
    chunk_size: int = 500
    overlap: int = 0
    separators: tuple[str, ...] = field(default=DEFAULT_SEPARATORS)

    def __post_init__(self):
        object.__setattr__(self, "separators", tuple(self.separators))
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        if not 0 <= self.overlap < self.chunk_size:
            raise ValueError("overlap must satisfy 0 <= overlap < chunk_size")
        if not self.separators or self.separators[-1] != "":
            raise ValueError('the last separator must be "" (hard split)')


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    span: Span
    text: str


def _pieces(text: str, start: int, end: int, sep: str) -> list[tuple[int, int]]:
    """Cut [start, end) after every occurrence of `sep`."""
    out = []
    pos = start
    while True:
        hit = text.find(sep, pos, end)
        if hit < 0:
            break
        cut = hit + len(sep)
        out.append((pos, cut))
        pos = cut
    if pos < end:
        out.append((pos, end))
    return out


def _windows(start: int, end: int, size: int, overlap: int) -> list[tuple[int, int]]:
    out = []
    pos = start
    while True:
        stop = min(pos + size, end)
        out.append((pos, stop))
        if stop >= end:
            return out
        pos = stop - overlap


def _split(text: str, start: int, end: int, seps: tuple[str, ...], cfg: ChunkConfig) -> list[tuple[int, int]]:
    size, overlap = cfg.chunk_size, cfg.overlap
    if end - start <= size:
        return [(start, end)]
    sep, rest = seps[0], seps[1:]
    if sep == "":
        return _windows(start, end, size, overlap)

    out: list[tuple[int, int]] = []
    cur_start: int | None = None
    cur_end = start

    def flush():
        nonlocal cur_start
        if cur_start is not None:
            out.append((cur_start, cur_end))
            cur_start = None

    for p_start, p_end in _pieces(text, start, end, sep):
        p_len = p_end - p_start
        if p_len > size:
            flush()
            out.extend(_split(text, p_start, p_end, rest, cfg))
            cur_end = p_end
            continue
        if cur_start is None:
            cur_start = p_start
            if overlap and out:
                # back up into the previous chunk, keeping the size bound and progress
                backup = min(overlap, size - p_len)
                cur_start = max(p_start - backup, out[-1][0] + 1)
        elif p_end - cur_start > size:
            prev_start = cur_start
            flush()
            cur_start = p_start
            if overlap:
                backup = min(overlap, size - p_len)
                cur_start = max(p_start - backup, prev_start + 1)
        cur_end = p_end
    flush()
    return out


def split(document: Document, config: ChunkConfig = ChunkConfig()) -> list[Chunk]:
    text = document.text
    if not text:
        return []
    spans = _split(text, 0, len(text), config.separators, config)
    return [Chunk(document.doc_id, Span(s, e), text[s:e]) for s, e in spans]


def split_corpus(documents, config: ChunkConfig = ChunkConfig()) -> list[Chunk]:
    chunks: list[Chunk] = []
    for doc in documents:
        chunks.extend(split(doc, config))
    return chunks
