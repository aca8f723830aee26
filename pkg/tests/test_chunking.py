import pytest
from hypothesis import given, settings, strategies as st

from sac.chunking import ChunkConfig, split, split_corpus
from sac.corpus import Document

from conftest import make_corpus


def spans(text, **kw):
    return [c.span.as_list() for c in split(Document("d", text), ChunkConfig(**kw))]


def test_empty_document():
    assert split(Document("d", ""), ChunkConfig()) == []


def test_forced_hard_split():
    assert spans("x" * 1200, chunk_size=500) == [[0, 500], [500, 1000], [1000, 1200]]


def test_separator_stays_with_preceding_piece():
    p1, p2 = "a" * 300, "b" * 300
    chunks = split(Document("d", p1 + "\n\n" + p2), ChunkConfig(chunk_size=500))
    assert [c.span.as_list() for c in chunks] == [[0, 302], [302, 602]]
    assert chunks[0].text.endswith("\n\n")


def test_small_pieces_merge():
    text = "one two three four five"
    assert spans(text, chunk_size=10) == [[0, 8], [8, 14], [14, 23]]


def test_falls_back_to_finer_separator():
    text = "a" * 8 + "\n" + "b" * 8 + "\n\n" + "c" * 4
    # the first paragraph (18 chars) exceeds 12, so it splits on single newlines
    assert spans(text, chunk_size=12) == [[0, 9], [9, 19], [19, 23]]


def test_overlap_windows():
    out = spans("x" * 1000, chunk_size=400, overlap=100)
    assert out == [[0, 400], [300, 700], [600, 1000]]


def test_overlap_respects_size_with_separators():
    text = " ".join(f"w{i:03d}" for i in range(200))
    chunks = split(Document("d", text), ChunkConfig(chunk_size=50, overlap=15))
    assert all(len(c.text) <= 50 for c in chunks)
    assert chunks[0].span.start == 0 and chunks[-1].span.end == len(text)
    for a, b in zip(chunks, chunks[1:]):
        assert a.span.start < b.span.start <= a.span.end


def test_config_validation():
    with pytest.raises(ValueError):
        ChunkConfig(chunk_size=0)
    with pytest.raises(ValueError):
        ChunkConfig(chunk_size=10, overlap=10)
    with pytest.raises(ValueError):
        ChunkConfig(separators=("\n",))


def test_split_corpus_keeps_document_order():
    corpus = make_corpus(**{"b.txt": "bbb", "a.txt": "aaa"})
    assert [c.doc_id for c in split_corpus(corpus)] == ["a.txt", "b.txt"]


texts = st.lists(st.sampled_from(["a", "bc", " ", "\n", "\n\n", "é", "€", "xyz "]), max_size=300).map("".join)


@settings(max_examples=200)
@given(texts, st.integers(1, 60))
def test_tiling_property(text, size):
    chunks = split(Document("d", text), ChunkConfig(chunk_size=size))
    assert "".join(c.text for c in chunks) == text
    pos = 0
    for c in chunks:
        assert c.span.start == pos and 0 < len(c.text) <= size
        assert text[c.span.start:c.span.end] == c.text
        pos = c.span.end
    assert pos == len(text)


@settings(max_examples=200)
@given(texts, st.integers(2, 60), st.data())
def test_overlap_property(text, size, data):
    overlap = data.draw(st.integers(0, size - 1))
    chunks = split(Document("d", text), ChunkConfig(chunk_size=size, overlap=overlap))
    covered = set()
    for c in chunks:
        assert len(c.text) <= size and text[c.span.start:c.span.end] == c.text
        covered.update(range(c.span.start, c.span.end))
    assert covered == set(range(len(text)))
    starts = [c.span.start for c in chunks]
    assert starts == sorted(set(starts))
