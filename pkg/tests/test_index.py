import json
import math
import random

import numpy as np
import pytest

from sac.chunking import Chunk, ChunkConfig, split_corpus
from sac.corpus import Span
from sac.embedding import EmbeddingProviderConfig, HashEmbedder
from sac.errors import IndexFormatError, SacError
from sac.index import Bm25Params, HybridWeights, build_index, load_index, save_index, tokenize
from sac.summarization import Summary

import oracles
from conftest import make_corpus

VOCAB = "nda party secret term breach law court notice data fee delaware york".split()


def chunks_of(texts, doc_size=2):
    out = []
    for i, t in enumerate(texts):
        start = (i % doc_size) * 1000
        out.append(Chunk(f"doc{i // doc_size:02d}.txt", Span(start, start + len(t)), t))
    return out


def random_texts(rng, n, lo=3, hi=20):
    return [" ".join(rng.choice(VOCAB) for _ in range(rng.randint(lo, hi))) for _ in range(n)]


def summary(doc_id, text):
    return Summary(doc_id, text, "generic", 150, 1, "stub")


def test_tokenize():
    assert tokenize("Non-Disclosure_Agreement, §2(b) Café") == ["non", "disclosure", "agreement", "2", "b", "café"]


def test_empty_index():
    idx = build_index([], None, HashEmbedder(16))
    assert len(idx) == 0
    assert idx.dense_search("x", 3).ranked == [] and idx.bm25_search("x", 3).ranked == []
    assert idx.hybrid_search("x", 3, HybridWeights(0.5)).ranked == []


def test_identity_augmentation_without_summaries():
    idx = build_index(chunks_of(["alpha beta", "gamma"]), None, HashEmbedder(16))
    assert all(c.augmented_text == c.chunk.text for c in idx.chunks)


def test_summary_prepended():
    chunks = chunks_of(["one", "two", "three", "four"])
    sums = {"doc00.txt": summary("doc00.txt", "S1"), "doc01.txt": summary("doc01.txt", "S2")}
    idx = build_index(chunks, sums, HashEmbedder(16))
    assert [c.augmented_text for c in idx.chunks] == ["S1\n\none", "S1\n\ntwo", "S2\n\nthree", "S2\n\nfour"]
    assert [c.chunk.text for c in idx.chunks] == ["one", "two", "three", "four"]


def test_missing_summary_is_fatal():
    with pytest.raises(SacError, match="doc01.txt"):
        build_index(chunks_of(["a", "b", "c"]), {"doc00.txt": summary("doc00.txt", "S")}, HashEmbedder(16))


def test_k_saturates():
    idx = build_index(chunks_of(["a b", "c d", "e f"]), None, HashEmbedder(16))
    assert len(idx.dense_search("a", 10)) == 3
    with pytest.raises(ValueError):
        idx.dense_search("a", 0)


def test_self_similarity():
    texts = random_texts(random.Random(1), 12)
    idx = build_index(chunks_of(texts), None, HashEmbedder(256))
    for i in (0, 5, 11):
        top, score = idx.dense_search(idx.chunks[i].augmented_text, 1).ranked[0]
        if texts.count(texts[i]) == 1:
            assert top.row == i
        assert math.isclose(score, 1.0, abs_tol=1e-6)


def test_dense_matches_brute_force():
    rng = random.Random(2)
    texts = random_texts(rng, 10)
    idx = build_index(chunks_of(texts), None, HashEmbedder(64))
    keys = [(c.doc_id, c.span.start) for c in idx.chunks]
    for q in random_texts(rng, 10, 1, 5):
        qv = [float(np.float32(x)) for x in HashEmbedder(64).embed([q])[0].values]
        scores = [oracles.cosine([float(x) for x in row], qv) for row in idx.vectors]
        expected = oracles.ranking(scores, keys)
        got = idx.dense_search(q, 10)
        assert [c.row for c in got.chunks] == expected
        assert np.allclose([s for _, s in got.ranked], [scores[i] for i in expected], atol=1e-12)


def test_ties_break_by_doc_then_start():
    chunks = [Chunk("b.txt", Span(0, 4), "same"), Chunk("a.txt", Span(9, 13), "same"),
              Chunk("a.txt", Span(0, 4), "same")]
    idx = build_index(chunks, None, HashEmbedder(16))
    assert [(c.doc_id, c.span.start) for c in idx.dense_search("same", 3).chunks] == \
        [("a.txt", 0), ("a.txt", 9), ("b.txt", 0)]


def test_bm25_absent_term_scores_zero():
    idx = build_index(chunks_of(["alpha beta", "gamma"]), None, HashEmbedder(16))
    assert not idx.bm25_scores("zeta").any()


def test_bm25_single_document():
    # N = 1, df = 1, tf = 1, |d| = avgdl: the tf factor is (1 * 2.5) / (1 + 1.5) = 1
    # and idf = ln((1 - 1 + 0.5) / (1 + 0.5) + 1) = ln(4/3)
    idx = build_index(chunks_of(["secret"]), None, HashEmbedder(16))
    assert abs(idx.bm25_scores("secret")[0] - math.log(4 / 3)) < 1e-12


def test_bm25_matches_oracle():
    rng = random.Random(3)
    texts = random_texts(rng, 20)
    idx = build_index(chunks_of(texts), None, HashEmbedder(16), Bm25Params(k1=1.2, b=0.6))
    for q in random_texts(rng, 10, 1, 4):
        assert np.allclose(idx.bm25_scores(q), oracles.bm25(texts, q, 1.2, 0.6), rtol=0, atol=1e-9)


def test_bm25_can_skip_summaries():
    chunks = chunks_of(["one", "two"])
    sums = {"doc00.txt": summary("doc00.txt", "fingerprint")}
    on = build_index(chunks, sums, HashEmbedder(16))
    off = build_index(chunks, sums, HashEmbedder(16), sparse_on_augmented=False)
    assert on.bm25_scores("fingerprint").all() and not off.bm25_scores("fingerprint").any()


def test_hybrid_degenerate_weights():
    rng = random.Random(4)
    idx = build_index(chunks_of(random_texts(rng, 30)), None, HashEmbedder(64))
    for q in random_texts(rng, 10, 1, 5):
        dense = [c.row for c in idx.dense_search(q, 10).chunks]
        sparse = [c.row for c in idx.bm25_search(q, 10).chunks]
        assert [c.row for c in idx.hybrid_search(q, 10, HybridWeights(1.0), pool=15).chunks] == dense
        assert [c.row for c in idx.hybrid_search(q, 10, HybridWeights(0.0), pool=15).chunks] == sparse


def test_hybrid_matches_fusion_oracle():
    rng = random.Random(5)
    texts = random_texts(rng, 10)
    idx = build_index(chunks_of(texts), None, HashEmbedder(64))
    keys = [(c.doc_id, c.span.start) for c in idx.chunks]
    for q in random_texts(rng, 5, 1, 5):
        dense, sparse = list(idx.dense_scores(q)), oracles.bm25(texts, q)
        fused = oracles.fuse(dense, sparse, list(range(10)), 0.5)
        members = list(fused)
        order = sorted(members, key=lambda i: (-fused[i], keys[i]))
        got = idx.hybrid_search(q, 10, HybridWeights(0.5), pool=10)
        assert [c.row for c in got.chunks] == order
        assert all(abs(s - fused[c.row]) < 1e-9 for c, s in got.ranked)


def test_hybrid_pool_must_cover_k():
    idx = build_index(chunks_of(["a", "b"]), None, HashEmbedder(16))
    with pytest.raises(ValueError):
        idx.hybrid_search("a", 5, HybridWeights(0.5), pool=4)


def _saved(tmp_path):
    corpus = make_corpus(**{f"d{i}.txt": " ".join(random_texts(random.Random(i), 30)) for i in range(4)})
    chunks = split_corpus(corpus, ChunkConfig(chunk_size=120))
    sums = {d.doc_id: summary(d.doc_id, f"summary of {d.doc_id}") for d in corpus}
    idx = build_index(chunks, sums, HashEmbedder(64), provider_config=EmbeddingProviderConfig(dim=64))
    save_index(idx, tmp_path / "ix")
    return idx, tmp_path / "ix"


def test_round_trip(tmp_path):
    idx, path = _saved(tmp_path)
    loaded = load_index(path)  # provider rebuilt from the manifest
    for q in random_texts(random.Random(9), 5, 1, 6):
        for search in ("dense_search", "bm25_search"):
            a, b = getattr(idx, search)(q, 15), getattr(loaded, search)(q, 15)
            assert [c.chunk for c in a.chunks] == [c.chunk for c in b.chunks]
            assert np.allclose([s for _, s in a.ranked], [s for _, s in b.ranked], atol=1e-6)
    assert loaded.meta["sac"] is True


def test_unknown_format_version(tmp_path):
    _, path = _saved(tmp_path)
    manifest = json.loads((path / "manifest.json").read_text())
    manifest["format_version"] = 99
    (path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(IndexFormatError, match="format_version 99"):
        load_index(path)


def test_truncated_vectors(tmp_path):
    idx, path = _saved(tmp_path)
    raw = (path / "vectors.f32").read_bytes()
    (path / "vectors.f32").write_bytes(raw[:-10])
    with pytest.raises(IndexFormatError, match=f"expected {len(raw)} bytes, found {len(raw) - 10}"):
        load_index(path)


def test_provider_mismatch(tmp_path):
    _, path = _saved(tmp_path)
    with pytest.raises(IndexFormatError, match="hash-fnv1a64-d32"):
        load_index(path, HashEmbedder(32))
