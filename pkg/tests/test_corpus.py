import json
import subprocess

import pytest
from hypothesis import given, strategies as st

from sac.corpus import (BenchmarkCase, Document, Span, benchmark_to_json, load_benchmark,
                        load_corpus, parse_benchmark)
from sac.errors import CorpusError, ValidationError

from conftest import make_corpus


def test_empty_directory(tmp_path):
    assert len(load_corpus(tmp_path)) == 0


def test_nested_files_get_relative_ids(tmp_path):
    (tmp_path / "a.txt").write_text("hello", encoding="utf-8")
    (tmp_path / "sub").mkdir()
    (tmp_path / "sub" / "b.txt").write_text("world", encoding="utf-8")
    corpus = load_corpus(tmp_path)
    assert [d.doc_id for d in corpus] == ["a.txt", "sub/b.txt"]
    assert [d.length for d in corpus] == [5, 5]


def test_hidden_and_non_txt_files_skipped(tmp_path):
    (tmp_path / "keep.txt").write_text("x", encoding="utf-8")
    (tmp_path / "notes.md").write_text("x", encoding="utf-8")
    (tmp_path / ".cache").mkdir()
    (tmp_path / ".cache" / "junk.txt").write_text("x", encoding="utf-8")
    assert [d.doc_id for d in load_corpus(tmp_path)] == ["keep.txt"]


def test_multibyte_character_counts_once(tmp_path):
    path = tmp_path / "euro.txt"
    path.write_bytes("price: 5€\n".encode("utf-8"))  # the euro sign is 3 bytes
    doc = load_corpus(tmp_path)["euro.txt"]
    # count scalar values with an independent decoder
    wc = subprocess.run(["wc", "-m"], input=path.read_bytes(), capture_output=True,
                        env={"LC_ALL": "C.UTF-8"}, check=True)
    assert doc.length == int(wc.stdout.split()[0]) == 10
    assert len(path.read_bytes()) == 12


def test_invalid_utf8_reports_offset(tmp_path):
    (tmp_path / "bad.txt").write_bytes(b"ok\xffno")
    with pytest.raises(CorpusError, match="byte offset 2"):
        load_corpus(tmp_path)


def test_span_invariants():
    with pytest.raises(ValueError):
        Span(3, 3)
    with pytest.raises(ValueError):
        Span(-1, 2)
    assert len(Span(2, 7)) == 5


def _bench(tmp_path, cases):
    path = tmp_path / "bench.json"
    path.write_text(json.dumps({"tests": cases}), encoding="utf-8")
    return path


def test_well_formed_case(tmp_path):
    corpus = make_corpus(**{"d.txt": "x" * 100})
    path = _bench(tmp_path, [{"query": "q", "snippets": [{"file_path": "d.txt", "span": [0, 10]}]}])
    cases = load_benchmark(path, corpus)
    assert len(cases) == 1
    assert cases[0].ground_truth == (("d.txt", Span(0, 10)),)
    assert cases[0].dataset_tag == "bench"


def test_out_of_bounds_span_names_case(tmp_path):
    corpus = make_corpus(**{"d.txt": "x" * 100})
    path = _bench(tmp_path, [{"query": "q", "snippets": [{"file_path": "d.txt", "span": [90, 120]}]}])
    with pytest.raises(ValidationError, match=r"case 0: d\.txt span \[90, 120\]"):
        load_benchmark(path, corpus)


def test_unknown_document_and_all_problems_reported(tmp_path):
    corpus = make_corpus(**{"d.txt": "x" * 10})
    path = _bench(tmp_path, [
        {"query": "a", "snippets": [{"file_path": "missing.txt", "span": [0, 1]}]},
        {"query": "b", "snippets": [{"file_path": "d.txt", "span": [5, 5]}]},
    ])
    with pytest.raises(ValidationError) as err:
        load_benchmark(path, corpus)
    assert "missing.txt" in str(err.value) and "case 1" in str(err.value)


def test_empty_case_list(tmp_path):
    assert load_benchmark(_bench(tmp_path, []), make_corpus(**{"d.txt": "x"})) == []


def test_malformed_json(tmp_path):
    path = tmp_path / "b.json"
    path.write_text("{nope", encoding="utf-8")
    with pytest.raises(CorpusError, match="malformed"):
        load_benchmark(path, make_corpus(**{"d.txt": "x"}))


def test_byte_span_unit_converts_to_characters():
    corpus = make_corpus(**{"d.txt": "€abc"})
    data = {"tests": [{"query": "q", "snippets": [{"file_path": "d.txt", "span": [3, 5]}]}]}
    assert parse_benchmark(data, corpus, span_unit="byte")[0].ground_truth[0][1] == Span(1, 3)
    data["tests"][0]["snippets"][0]["span"] = [1, 5]
    with pytest.raises(ValidationError, match="multi-byte"):
        parse_benchmark(data, corpus, span_unit="byte")


def test_canonical_round_trip():
    corpus = make_corpus(**{"a.txt": "abcdef", "b.txt": "ghijkl"})
    cases = [BenchmarkCase("q1", (("a.txt", Span(0, 2)), ("b.txt", Span(3, 6))), "ds", case_id="c1")]
    again = parse_benchmark(benchmark_to_json(cases), corpus)
    assert again == cases


def test_duplicate_doc_ids_rejected():
    with pytest.raises(CorpusError):
        make_corpus(**{"a.txt": "x"}).from_documents([Document("a", "x"), Document("a", "y")])


@given(st.text(min_size=1, max_size=200), st.data())
def test_slice_length_matches_span(text, data):
    doc = Document("d", text)
    start = data.draw(st.integers(0, doc.length - 1))
    end = data.draw(st.integers(start + 1, doc.length))
    assert len(doc.slice(Span(start, end))) == end - start
